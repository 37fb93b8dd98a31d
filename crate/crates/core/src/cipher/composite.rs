//! Grayscale composite: the R, G and B planes of a color image laid side by
//! side as one single-channel image.

use crate::raster::RasterImage;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Stacking axis of the composite.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Planes stacked top to bottom: `W × 3H`.
    #[default]
    Vertical,
    /// Planes placed left to right: `3W × H`.
    Horizontal,
}

impl std::str::FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "vertical" => Ok(Orientation::Vertical),
            "horizontal" => Ok(Orientation::Horizontal),
            other => Err(format!("unknown orientation {other:?}")),
        }
    }
}

impl std::fmt::Display for Orientation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Orientation::Vertical => "vertical",
            Orientation::Horizontal => "horizontal",
        })
    }
}

impl Orientation {
    /// Composite dimensions for a `width × height` color image.
    pub fn composite_size(self, width: usize, height: usize) -> (usize, usize) {
        match self {
            Orientation::Vertical => (width, 3 * height),
            Orientation::Horizontal => (3 * width, height),
        }
    }
}

/// Splits an RGB image into its planes and stacks them in R, G, B order.
/// Samples are copied verbatim.
pub fn to_grayscale_composite(image: &RasterImage, orientation: Orientation) -> Result<RasterImage> {
    image.require_channels(3)?;
    let (w, h) = (image.width(), image.height());
    let (cw, ch) = orientation.composite_size(w, h);
    RasterImage::from_fn(cw, ch, 1, |x, y, _| match orientation {
        Orientation::Vertical => image.sample(x, y % h, y / h),
        Orientation::Horizontal => image.sample(x % w, y, x / w),
    })
}

/// Inverse of [`to_grayscale_composite`].
pub fn from_grayscale_composite(image: &RasterImage, orientation: Orientation) -> Result<RasterImage> {
    image.require_channels(1)?;
    let (cw, ch) = (image.width(), image.height());
    let (w, h) = match orientation {
        Orientation::Vertical => (cw, ch / 3),
        Orientation::Horizontal => (cw / 3, ch),
    };
    let stacked = match orientation {
        Orientation::Vertical => ch,
        Orientation::Horizontal => cw,
    };
    if stacked % 3 != 0 || w == 0 || h == 0 {
        return Err(Error::GeometryMismatch(format!(
            "{cw}x{ch} composite cannot hold three {orientation} planes"
        )));
    }
    RasterImage::from_fn(w, h, 3, |x, y, c| match orientation {
        Orientation::Vertical => image.sample(x, c * h + y, 0),
        Orientation::Horizontal => image.sample(c * w + x, y, 0),
    })
}
