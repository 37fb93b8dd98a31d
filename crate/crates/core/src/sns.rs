//! Simulated social-network recompression of uploaded JPEG files.
//!
//! | provider     | upload                         | download            |
//! |--------------|--------------------------------|---------------------|
//! | Twitter      | 4:2:0 or 4:4:4, Qf 1..=84      | unchanged           |
//! | Twitter      | 4:2:0 or 4:4:4, Qf 85..=100    | 4:2:0, Qf 85        |
//! | Facebook     | anything                       | 4:2:0, Qf in 71..=85|
//!
//! Single-component (grayscale) uploads follow the same quality rules and
//! are re-encoded as single-component streams: there is no chroma to
//! subsample.

use crate::codec::{self, JpegParams, JpegStreamInfo, Subsampling};
use crate::raster::RasterImage;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Twitter re-encodes uploads at or above this quality.
pub const TWITTER_RECOMPRESS_FROM: u8 = 85;
pub const TWITTER_OUTPUT_QUALITY: u8 = 85;
/// Range of qualities Facebook is observed to re-encode with.
pub const FACEBOOK_QUALITY_RANGE: std::ops::RangeInclusive<u8> = 71..=85;
pub const FACEBOOK_DEFAULT_QUALITY: u8 = 85;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provider {
    Twitter,
    FacebookHq,
    FacebookLq,
}

impl Provider {
    pub const ALL: [Provider; 3] = [Provider::Twitter, Provider::FacebookHq, Provider::FacebookLq];

    /// Longest accepted side in pixels.
    pub fn max_dim(self) -> usize {
        match self {
            Provider::Twitter => 4096,
            Provider::FacebookHq => 2048,
            Provider::FacebookLq => 960,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Provider::Twitter => "twitter",
            Provider::FacebookHq => "facebook-hq",
            Provider::FacebookLq => "facebook-lq",
        }
    }
}

impl std::fmt::Display for Provider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for Provider {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Provider::ALL
            .into_iter()
            .find(|p| p.id() == s)
            .ok_or_else(|| format!("unknown provider {s:?} (twitter, facebook-hq, facebook-lq)"))
    }
}

/// How Facebook picks the download quality. The real rule is unpublished.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FacebookQfRule {
    Constant(u8),
    /// Download quality per upload quality; index 0 is Qf 1. Unknown
    /// upload quality uses the last entry.
    PerUploadQuality(Box<[u8; 100]>),
}

impl Default for FacebookQfRule {
    fn default() -> Self {
        FacebookQfRule::Constant(FACEBOOK_DEFAULT_QUALITY)
    }
}

impl FacebookQfRule {
    pub fn validate(&self) -> Result<()> {
        let values: &[u8] = match self {
            FacebookQfRule::Constant(q) => std::slice::from_ref(q),
            FacebookQfRule::PerUploadQuality(table) => &table[..],
        };
        if let Some(bad) = values.iter().find(|q| !FACEBOOK_QUALITY_RANGE.contains(q)) {
            return Err(Error::Policy(format!(
                "Facebook re-encode quality {bad} outside {}..={}",
                FACEBOOK_QUALITY_RANGE.start(),
                FACEBOOK_QUALITY_RANGE.end()
            )));
        }
        Ok(())
    }

    fn quality_for(&self, upload: Option<u8>) -> u8 {
        match self {
            FacebookQfRule::Constant(q) => *q,
            FacebookQfRule::PerUploadQuality(table) => table[upload.map_or(99, |q| q.clamp(1, 100) as usize - 1)],
        }
    }
}

impl std::str::FromStr for FacebookQfRule {
    type Err = String;

    /// Parses `const:<n>`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let n = s
            .strip_prefix("const:")
            .ok_or_else(|| format!("unknown Facebook quality rule {s:?} (expected const:<n>)"))?;
        let q: u8 = n.parse().map_err(|_| format!("bad quality in {s:?}"))?;
        let rule = FacebookQfRule::Constant(q);
        rule.validate().map_err(|e| e.to_string())?;
        Ok(rule)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnsPolicy {
    pub provider: Provider,
    pub facebook_rule: FacebookQfRule,
    /// Downscale oversized uploads instead of rejecting them.
    pub downscale: bool,
}

impl SnsPolicy {
    pub fn new(provider: Provider) -> Self {
        Self {
            provider,
            facebook_rule: FacebookQfRule::default(),
            downscale: false,
        }
    }

    pub fn max_dim(&self) -> usize {
        self.provider.max_dim()
    }
}

/// Channel layout of an uploaded stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UploadSampling {
    Grayscale,
    Color(Subsampling),
    /// Three components with factors other than 4:4:4 or 4:2:0.
    OtherColor,
}

/// What the provider looks at when deciding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UploadProperties {
    pub width: usize,
    pub height: usize,
    pub sampling: UploadSampling,
    /// `None` when the quantization tables are not IJG-scaled.
    pub quality: Option<u8>,
}

impl UploadProperties {
    pub fn from_stream(info: &JpegStreamInfo) -> Self {
        let sampling = match (info.component_count(), info.subsampling()) {
            (1, _) => UploadSampling::Grayscale,
            (_, Some(s)) => UploadSampling::Color(s),
            _ => UploadSampling::OtherColor,
        };
        Self {
            width: info.width,
            height: info.height,
            sampling,
            quality: info.estimated_quality,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RecompressionDecision {
    pub recompressed: bool,
    pub output_quality: Option<u8>,
    pub output_subsampling: Option<Subsampling>,
    pub resized: bool,
}

impl RecompressionDecision {
    const PASSTHROUGH: Self = Self {
        recompressed: false,
        output_quality: None,
        output_subsampling: None,
        resized: false,
    };

    fn recompress(quality: u8, resized: bool) -> Self {
        Self {
            recompressed: true,
            output_quality: Some(quality),
            output_subsampling: Some(Subsampling::S420),
            resized,
        }
    }
}

/// Applies the provider's rules to an upload.
///
/// Twitter treats an upload whose quality cannot be estimated as high
/// quality. An oversized upload is marked `resized` when the policy allows
/// downscaling; [`simulate`] rejects it otherwise.
pub fn decide(policy: &SnsPolicy, upload: &UploadProperties) -> RecompressionDecision {
    let oversized = upload.width.max(upload.height) > policy.max_dim();
    let resized = oversized && policy.downscale;
    match policy.provider {
        Provider::Twitter => {
            let high = upload.quality.is_none_or(|q| q >= TWITTER_RECOMPRESS_FROM);
            if high || resized {
                RecompressionDecision::recompress(TWITTER_OUTPUT_QUALITY, resized)
            } else {
                RecompressionDecision::PASSTHROUGH
            }
        }
        Provider::FacebookHq | Provider::FacebookLq => {
            RecompressionDecision::recompress(policy.facebook_rule.quality_for(upload.quality), resized)
        }
    }
}

/// Bilinear resize so the longest side is at most `max_dim`.
pub fn downscale_to_fit(image: &RasterImage, max_dim: usize) -> Result<RasterImage> {
    let (w, h) = (image.width(), image.height());
    let longest = w.max(h);
    if longest <= max_dim {
        return Ok(image.clone());
    }
    let nw = ((w * max_dim) as f64 / longest as f64).round().max(1.0) as u32;
    let nh = ((h * max_dim) as f64 / longest as f64).round().max(1.0) as u32;
    let filter = image::imageops::FilterType::Triangle;
    let samples = match image.channels() {
        1 => {
            let buf = image::GrayImage::from_raw(w as u32, h as u32, image.samples().to_vec()).expect("sizes match");
            image::imageops::resize(&buf, nw, nh, filter).into_raw()
        }
        _ => {
            let buf = image::RgbImage::from_raw(w as u32, h as u32, image.samples().to_vec()).expect("sizes match");
            image::imageops::resize(&buf, nw, nh, filter).into_raw()
        }
    };
    RasterImage::new(nw as usize, nh as usize, image.channels(), samples)
}

/// Runs an upload through the provider. Passthrough returns the upload
/// bytes unchanged.
pub fn simulate(policy: &SnsPolicy, upload: &[u8]) -> Result<(Vec<u8>, RecompressionDecision)> {
    policy.facebook_rule.validate()?;
    let info = codec::read_stream_info(upload)?;
    let props = UploadProperties::from_stream(&info);
    if props.width.max(props.height) > policy.max_dim() && !policy.downscale {
        return Err(Error::SizeCap {
            width: props.width,
            height: props.height,
            max: policy.max_dim(),
        });
    }
    let decision = decide(policy, &props);
    if !decision.recompressed {
        return Ok((upload.to_vec(), decision));
    }
    let (mut image, _) = codec::decode_jpeg(upload)?;
    if decision.resized {
        image = downscale_to_fit(&image, policy.max_dim())?;
    }
    let params = JpegParams::for_image(
        &image,
        decision.output_quality.expect("recompression has a quality"),
        decision.output_subsampling.expect("recompression has a subsampling"),
    );
    Ok((codec::encode_jpeg(&image, &params)?, decision))
}
