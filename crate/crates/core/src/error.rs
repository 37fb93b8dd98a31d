use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("expected {expected} channel(s), found {found}")]
    ChannelCount { expected: usize, found: usize },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("key format: {0}")]
    KeyFormat(String),

    #[error("key scheme mismatch: keys derived for {keys}, cipher configured for {config}")]
    SchemeMismatch { keys: &'static str, config: &'static str },

    #[error("quality factor {0} outside [1, 100]")]
    InvalidQuality(u8),

    #[error("{width}x{height} exceeds the provider limit of {max} pixels per side")]
    SizeCap { width: usize, height: usize, max: usize },

    #[error("invalid policy: {0}")]
    Policy(String),

    #[error("malformed JPEG stream: {0}")]
    MalformedJpeg(String),

    #[error("JPEG encoding failed")]
    JpegEncode(#[from] jpeg_encoder::EncodingError),

    #[error("JPEG decoding failed")]
    JpegDecode(#[from] jpeg_decoder::Error),

    #[error("PNG I/O failed")]
    Png(#[from] image::ImageError),

    #[error("metadata: {0}")]
    Metadata(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
