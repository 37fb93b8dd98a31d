//! Block scrambling image encryption for encryption-then-compression (EtC)
//! pipelines.
//!
//! Two schemes are provided:
//!
//! - **Conventional**: an RGB image is split into blocks (16×16 by default),
//!   then the blocks are permuted, rotated/flipped, negative–positive
//!   transformed and color-shuffled, each step driven by its own subkey.
//! - **Grayscale**: the R, G and B planes are stacked into a single-channel
//!   composite image which is scrambled with 8×8 blocks and no color shuffle.
//!   The composite is a one-component JPEG, so chroma subsampling never
//!   touches it.
//!
//! Around the cipher live a JPEG adapter ([`codec`]), a simulator of social
//! network recompression ([`sns`]), a jigsaw-solver attack harness with
//! assembly metrics ([`attack`]) and the PSNR-versus-quality experiment
//! pipeline ([`experiment`]).

pub mod attack;
pub mod cipher;
pub mod codec;
mod error;
pub mod experiment;
pub mod keystream;
pub mod raster;
pub mod sns;
pub mod transform;

pub use error::{Error, Result};
pub use raster::{assemble_blocks, block_count, split_into_blocks, BlockGeometry, RasterImage};
