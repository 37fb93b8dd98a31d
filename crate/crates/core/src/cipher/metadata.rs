//! Sidecar describing how an image was encrypted. Never holds key material.

use super::{CipherConfig, Orientation};
use crate::keystream::{Scheme, KEYSTREAM_ALGORITHM_ID};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

pub const METADATA_FORMAT_VERSION: u32 = 1;

/// Prefix of the JPEG comment segment that embeds the metadata.
pub const COMMENT_PREFIX: &str = "bscramble-metadata:";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncryptionMetadata {
    pub format_version: u32,
    pub scheme: Scheme,
    pub block_w: usize,
    pub block_h: usize,
    pub orientation: Orientation,
    pub original_width: usize,
    pub original_height: usize,
    pub keystream_algorithm_id: String,
}

impl EncryptionMetadata {
    pub fn new(cfg: &CipherConfig, original_width: usize, original_height: usize) -> Self {
        Self {
            format_version: METADATA_FORMAT_VERSION,
            scheme: cfg.scheme,
            block_w: cfg.block_w,
            block_h: cfg.block_h,
            orientation: cfg.orientation,
            original_width,
            original_height,
            keystream_algorithm_id: KEYSTREAM_ALGORITHM_ID.to_string(),
        }
    }

    /// Cipher configuration to decrypt with.
    pub fn cipher_config(&self) -> CipherConfig {
        CipherConfig {
            scheme: self.scheme,
            block_w: self.block_w,
            block_h: self.block_h,
            orientation: self.orientation,
            allow_sub_mcu: true,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata always serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let meta: Self = serde_json::from_str(text)?;
        meta.check_compatible()?;
        Ok(meta)
    }

    /// Text for a JPEG COM segment.
    pub fn to_comment(&self) -> String {
        format!(
            "{COMMENT_PREFIX}{}",
            serde_json::to_string(self).expect("metadata always serializes")
        )
    }

    /// Finds the metadata among JPEG comment payloads.
    pub fn from_comments<'a>(comments: impl IntoIterator<Item = &'a [u8]>) -> Option<Result<Self>> {
        comments.into_iter().find_map(|c| {
            let text = std::str::from_utf8(c).ok()?;
            text.strip_prefix(COMMENT_PREFIX).map(Self::from_json)
        })
    }

    fn check_compatible(&self) -> Result<()> {
        if self.format_version != METADATA_FORMAT_VERSION {
            return Err(Error::InvalidImage(format!(
                "metadata format version {} is not supported (expected {METADATA_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.keystream_algorithm_id != KEYSTREAM_ALGORITHM_ID {
            return Err(Error::InvalidImage(format!(
                "image was encrypted with keystream {:?}; this build implements {KEYSTREAM_ALGORITHM_ID:?}",
                self.keystream_algorithm_id
            )));
        }
        Ok(())
    }
}
