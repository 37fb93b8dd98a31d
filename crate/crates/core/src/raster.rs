//! Pixel rasters and block geometry.

use crate::{Error, Result};

/// Bits per sample. Only 8-bit images are supported.
pub const BIT_DEPTH: u32 = 8;

/// Largest sample value, `2^L - 1`.
pub const MAX_SAMPLE: u8 = u8::MAX;

/// A decoded image: row-major, channel-interleaved 8-bit samples.
///
/// Blocks cut out of an image are themselves `RasterImage`s.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty image {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "{channels} channels; only grayscale (1) and RGB (3) are supported"
            )));
        }
        let expected = width * height * channels;
        if samples.len() != expected {
            return Err(Error::InvalidImage(format!(
                "{} samples for a {width}x{height}x{channels} image (expected {expected})",
                samples.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    /// An image with every sample set to `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image by evaluating `f(x, y, channel)` for every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    samples.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bit_depth(&self) -> u32 {
        BIT_DEPTH
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [u8] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, c: usize) -> u8 {
        self.samples[self.index(x, y, c)]
    }

    pub(crate) fn require_channels(&self, expected: usize) -> Result<()> {
        if self.channels != expected {
            return Err(Error::ChannelCount {
                expected,
                found: self.channels,
            });
        }
        Ok(())
    }

    /// Copies the `w`×`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::InvalidGeometry(format!(
                "window {w}x{h}+{x0}+{y0} outside {}x{} image",
                self.width, self.height
            )));
        }
        let row_len = w * self.channels;
        let mut samples = Vec::with_capacity(row_len * h);
        for y in y0..y0 + h {
            let start = self.index(x0, y, 0);
            samples.extend_from_slice(&self.samples[start..start + row_len]);
        }
        Self::new(w, h, self.channels, samples)
    }

    /// Drops right and bottom margins so both dimensions become multiples
    /// of the block size.
    pub fn crop_to_blocks(&self, block_w: usize, block_h: usize) -> Result<Self> {
        let geom = BlockGeometry::covering(self.width, self.height, block_w, block_h)?;
        self.crop(0, 0, geom.cols * block_w, geom.rows * block_h)
    }
}

/// Block layout of an image: `cols × rows` blocks of `block_w × block_h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockGeometry {
    pub block_w: usize,
    pub block_h: usize,
    pub cols: usize,
    pub rows: usize,
}

impl BlockGeometry {
    /// Geometry of the whole blocks that fit in a `width × height` image.
    /// Partial blocks on the right and bottom are not counted.
    pub fn covering(width: usize, height: usize, block_w: usize, block_h: usize) -> Result<Self> {
        if width == 0 || height == 0 || block_w == 0 || block_h == 0 {
            return Err(Error::InvalidGeometry(format!(
                "zero dimension in image {width}x{height} / block {block_w}x{block_h}"
            )));
        }
        let cols = width / block_w;
        let rows = height / block_h;
        if cols == 0 || rows == 0 {
            return Err(Error::InvalidGeometry(format!(
                "block {block_w}x{block_h} larger than image {width}x{height}"
            )));
        }
        Ok(Self {
            block_w,
            block_h,
            cols,
            rows,
        })
    }

    /// Geometry for an image that must tile exactly into blocks.
    pub fn exact(width: usize, height: usize, block_w: usize, block_h: usize) -> Result<Self> {
        let geom = Self::covering(width, height, block_w, block_h)?;
        if geom.cols * block_w != width || geom.rows * block_h != height {
            return Err(Error::GeometryMismatch(format!(
                "{width}x{height} is not a multiple of the {block_w}x{block_h} block size; crop the input first"
            )));
        }
        Ok(geom)
    }

    /// Geometry of a `cols × rows` grid of blocks.
    pub fn grid(cols: usize, rows: usize, block_w: usize, block_h: usize) -> Result<Self> {
        Self::exact(cols * block_w, rows * block_h, block_w, block_h)
    }

    /// Number of blocks.
    pub fn n(&self) -> usize {
        self.cols * self.rows
    }

    pub fn width(&self) -> usize {
        self.cols * self.block_w
    }

    pub fn height(&self) -> usize {
        self.rows * self.block_h
    }
}

/// `⌊width / block_w⌋ × ⌊height / block_h⌋`.
pub fn block_count(width: usize, height: usize, block_w: usize, block_h: usize) -> Result<usize> {
    if width == 0 || height == 0 || block_w == 0 || block_h == 0 {
        return Err(Error::InvalidGeometry(format!(
            "zero dimension in image {width}x{height} / block {block_w}x{block_h}"
        )));
    }
    Ok((width / block_w) * (height / block_h))
}

fn check_image_matches(image: &RasterImage, geom: &BlockGeometry) -> Result<()> {
    if image.width() != geom.width() || image.height() != geom.height() {
        return Err(Error::GeometryMismatch(format!(
            "{}x{} image does not tile into {}x{} blocks of {}x{}",
            image.width(),
            image.height(),
            geom.cols,
            geom.rows,
            geom.block_w,
            geom.block_h
        )));
    }
    Ok(())
}

/// Cuts an image into its blocks in row-major scan order.
pub fn split_into_blocks(image: &RasterImage, geom: &BlockGeometry) -> Result<Vec<RasterImage>> {
    check_image_matches(image, geom)?;
    let mut blocks = Vec::with_capacity(geom.n());
    for row in 0..geom.rows {
        for col in 0..geom.cols {
            blocks.push(image.crop(col * geom.block_w, row * geom.block_h, geom.block_w, geom.block_h)?);
        }
    }
    Ok(blocks)
}

/// Inverse of [`split_into_blocks`].
pub fn assemble_blocks(blocks: &[RasterImage], geom: &BlockGeometry) -> Result<RasterImage> {
    if blocks.len() != geom.n() {
        return Err(Error::GeometryMismatch(format!(
            "{} blocks for a grid of {}",
            blocks.len(),
            geom.n()
        )));
    }
    let channels = blocks[0].channels();
    for (i, b) in blocks.iter().enumerate() {
        if b.width() != geom.block_w || b.height() != geom.block_h || b.channels() != channels {
            return Err(Error::GeometryMismatch(format!(
                "block {i} is {}x{}x{}, expected {}x{}x{channels}",
                b.width(),
                b.height(),
                b.channels(),
                geom.block_w,
                geom.block_h
            )));
        }
    }
    let width = geom.width();
    let mut samples = vec![0u8; width * geom.height() * channels];
    let row_len = geom.block_w * channels;
    for (i, b) in blocks.iter().enumerate() {
        let x0 = (i % geom.cols) * geom.block_w;
        let y0 = (i / geom.cols) * geom.block_h;
        for y in 0..geom.block_h {
            let dst = ((y0 + y) * width + x0) * channels;
            let src = y * row_len;
            samples[dst..dst + row_len].copy_from_slice(&b.samples()[src..src + row_len]);
        }
    }
    RasterImage::new(width, geom.height(), channels, samples)
}
