//! Block scrambling encryption and decryption.
//!
//! Encryption permutes the blocks, then per output block applies the D4
//! transform, the negative–positive step and (conventional scheme only) the
//! color shuffle. Decryption undoes those steps in reverse order. All
//! channels of a block share one position, D4 code and negation flag.

mod composite;
mod metadata;

pub use composite::{from_grayscale_composite, to_grayscale_composite, Orientation};
pub use metadata::{EncryptionMetadata, METADATA_FORMAT_VERSION};

use crate::keystream::{KeySet, Scheme, TransformSpec};
use crate::raster::{assemble_blocks, split_into_blocks, BlockGeometry, RasterImage};
use crate::transform::negative_positive;
use crate::{Error, Result};
use rayon::prelude::*;

/// Smallest block side that keeps conventional-scheme blocks aligned with
/// 4:2:0 minimum coded units.
pub const MCU_BLOCK: usize = 16;

/// Smallest block side of the grayscale scheme (one DCT block).
pub const DCT_BLOCK: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CipherConfig {
    pub scheme: Scheme,
    pub block_w: usize,
    pub block_h: usize,
    /// Only used by the grayscale scheme.
    pub orientation: Orientation,
    /// Permits conventional-scheme blocks that do not cover whole 16×16
    /// MCUs, such as 8×8.
    pub allow_sub_mcu: bool,
}

impl CipherConfig {
    pub fn conventional() -> Self {
        Self {
            scheme: Scheme::Conventional,
            block_w: MCU_BLOCK,
            block_h: MCU_BLOCK,
            orientation: Orientation::Vertical,
            allow_sub_mcu: false,
        }
    }

    pub fn grayscale() -> Self {
        Self {
            scheme: Scheme::Grayscale,
            block_w: DCT_BLOCK,
            block_h: DCT_BLOCK,
            orientation: Orientation::Vertical,
            allow_sub_mcu: false,
        }
    }

    pub fn for_scheme(scheme: Scheme) -> Self {
        match scheme {
            Scheme::Conventional => Self::conventional(),
            Scheme::Grayscale => Self::grayscale(),
        }
    }

    /// Sets a square block size; conventional blocks smaller than an MCU
    /// are accepted because this is an explicit override.
    pub fn with_block_size(mut self, side: usize) -> Self {
        self.block_w = side;
        self.block_h = side;
        self.allow_sub_mcu = self.scheme == Scheme::Conventional && !side.is_multiple_of(MCU_BLOCK);
        self
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_w == 0 || self.block_h == 0 {
            return Err(Error::InvalidGeometry("zero block size".into()));
        }
        if self.block_w != self.block_h {
            return Err(Error::InvalidGeometry(format!(
                "{}x{} blocks cannot be rotated by quarter turns; use square blocks",
                self.block_w, self.block_h
            )));
        }
        if self.scheme == Scheme::Conventional
            && !self.allow_sub_mcu
            && (!self.block_w.is_multiple_of(MCU_BLOCK) || !self.block_h.is_multiple_of(MCU_BLOCK))
        {
            return Err(Error::InvalidGeometry(format!(
                "conventional blocks of {}x{} split 16x16 JPEG MCUs; set allow_sub_mcu to force it",
                self.block_w, self.block_h
            )));
        }
        Ok(())
    }

    /// Block geometry of the image the cipher actually scrambles (the
    /// composite for the grayscale scheme) for a `width × height` input.
    pub fn geometry(&self, width: usize, height: usize) -> Result<BlockGeometry> {
        let (w, h) = match self.scheme {
            Scheme::Conventional => (width, height),
            Scheme::Grayscale => self.orientation.composite_size(width, height),
        };
        BlockGeometry::exact(w, h, self.block_w, self.block_h)
    }
}

fn check_scheme(keys: &KeySet, cfg: &CipherConfig, expected: Scheme) -> Result<()> {
    cfg.validate()?;
    if cfg.scheme != expected || keys.scheme() != expected {
        return Err(Error::SchemeMismatch {
            keys: keys.scheme().id(),
            config: cfg.scheme.id(),
        });
    }
    Ok(())
}

/// Applies a transform spec to an image that tiles into `geom`.
pub fn scramble(image: &RasterImage, spec: &TransformSpec, geom: &BlockGeometry) -> Result<RasterImage> {
    spec.validate(geom.n())?;
    if spec.color_perms.is_some() {
        image.require_channels(3)?;
    }
    let blocks = split_into_blocks(image, geom)?;
    let out: Vec<RasterImage> = (0..geom.n())
        .into_par_iter()
        .map(|i| {
            let b = spec.d4_codes[i].apply(&blocks[spec.permutation[i]])?;
            let b = negative_positive(&b, spec.neg_flags[i]);
            match &spec.color_perms {
                Some(perms) => perms[i].apply(&b),
                None => Ok(b),
            }
        })
        .collect::<Result<_>>()?;
    assemble_blocks(&out, geom)
}

/// Inverse of [`scramble`]: color unshuffle, negative–positive, inverse
/// D4, inverse permutation.
pub fn unscramble(image: &RasterImage, spec: &TransformSpec, geom: &BlockGeometry) -> Result<RasterImage> {
    spec.validate(geom.n())?;
    if spec.color_perms.is_some() {
        image.require_channels(3)?;
    }
    let blocks = split_into_blocks(image, geom)?;
    let inverse = spec.inverse_permutation();
    let out: Vec<RasterImage> = (0..geom.n())
        .into_par_iter()
        .map(|src| {
            let i = inverse[src];
            let b = match &spec.color_perms {
                Some(perms) => perms[i].inverse().apply(&blocks[i])?,
                None => blocks[i].clone(),
            };
            let b = negative_positive(&b, spec.neg_flags[i]);
            spec.d4_codes[i].inverse().apply(&b)
        })
        .collect::<Result<_>>()?;
    assemble_blocks(&out, geom)
}

pub fn encrypt_conventional(image: &RasterImage, keys: &KeySet, cfg: &CipherConfig) -> Result<RasterImage> {
    check_scheme(keys, cfg, Scheme::Conventional)?;
    image.require_channels(3)?;
    let geom = cfg.geometry(image.width(), image.height())?;
    let spec = TransformSpec::generate(keys, geom.n())?;
    scramble(image, &spec, &geom)
}

pub fn decrypt_conventional(image: &RasterImage, keys: &KeySet, cfg: &CipherConfig) -> Result<RasterImage> {
    check_scheme(keys, cfg, Scheme::Conventional)?;
    image.require_channels(3)?;
    let geom = cfg.geometry(image.width(), image.height())?;
    let spec = TransformSpec::generate(keys, geom.n())?;
    unscramble(image, &spec, &geom)
}

/// Builds the grayscale composite and scrambles it. The result has one
/// channel.
pub fn encrypt_grayscale(image: &RasterImage, keys: &KeySet, cfg: &CipherConfig) -> Result<RasterImage> {
    check_scheme(keys, cfg, Scheme::Grayscale)?;
    let composite = to_grayscale_composite(image, cfg.orientation)?;
    let geom = BlockGeometry::exact(composite.width(), composite.height(), cfg.block_w, cfg.block_h)?;
    let spec = TransformSpec::generate(keys, geom.n())?;
    scramble(&composite, &spec, &geom)
}

pub fn decrypt_grayscale(image: &RasterImage, keys: &KeySet, cfg: &CipherConfig) -> Result<RasterImage> {
    check_scheme(keys, cfg, Scheme::Grayscale)?;
    image.require_channels(1)?;
    let geom = BlockGeometry::exact(image.width(), image.height(), cfg.block_w, cfg.block_h)?;
    let spec = TransformSpec::generate(keys, geom.n())?;
    let composite = unscramble(image, &spec, &geom)?;
    from_grayscale_composite(&composite, cfg.orientation)
}

/// Encrypts with whichever scheme `cfg` names.
pub fn encrypt(image: &RasterImage, keys: &KeySet, cfg: &CipherConfig) -> Result<RasterImage> {
    match cfg.scheme {
        Scheme::Conventional => encrypt_conventional(image, keys, cfg),
        Scheme::Grayscale => encrypt_grayscale(image, keys, cfg),
    }
}

pub fn decrypt(image: &RasterImage, keys: &KeySet, cfg: &CipherConfig) -> Result<RasterImage> {
    match cfg.scheme {
        Scheme::Conventional => decrypt_conventional(image, keys, cfg),
        Scheme::Grayscale => decrypt_grayscale(image, keys, cfg),
    }
}

/// log2 of the number of distinct keyed transforms for `n` blocks:
/// `log2(n!)` for the permutation, 3 bits of D4 code and 1 negation bit per
/// block, plus `log2(6)` per block for the conventional color shuffle.
pub fn estimate_keyspace(scheme: Scheme, n: usize) -> f64 {
    let log2_factorial: f64 = (2..=n).map(|k| (k as f64).log2()).sum();
    let per_block = match scheme {
        Scheme::Conventional => 3.0 + 1.0 + 6f64.log2(),
        Scheme::Grayscale => 3.0 + 1.0,
    };
    log2_factorial + per_block * n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keystream::SecretKey;
    use crate::transform::{ColorPerm, D4};
    use proptest::prelude::*;

    fn keys(scheme: Scheme, byte: u8) -> KeySet {
        KeySet::derive(&SecretKey::from_bytes(&[byte; 32]).unwrap(), scheme)
    }

    fn noise(w: usize, h: usize, c: usize, seed: u64) -> RasterImage {
        let mut s = seed;
        RasterImage::from_fn(w, h, c, |_, _, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 56) as u8
        })
        .unwrap()
    }

    #[test]
    fn config_defaults_and_validation() {
        assert_eq!(CipherConfig::conventional().block_w, 16);
        assert_eq!(CipherConfig::grayscale().block_w, 8);
        let mut cfg = CipherConfig::conventional();
        cfg.block_w = 8;
        cfg.block_h = 8;
        assert!(cfg.validate().is_err());
        assert!(CipherConfig::conventional().with_block_size(8).validate().is_ok());
        let mut rect = CipherConfig::grayscale();
        rect.block_h = 4;
        assert!(rect.validate().is_err());
    }

    #[test]
    fn constant_image_is_fixed_point_without_negation() {
        let img = RasterImage::filled(32, 32, 3, 128).unwrap();
        let geom = BlockGeometry::exact(32, 32, 16, 16).unwrap();
        let mut spec = TransformSpec::generate(&keys(Scheme::Conventional, 1), 4).unwrap();
        spec.neg_flags = vec![false; 4];
        assert_eq!(scramble(&img, &spec, &geom).unwrap(), img);
    }

    #[test]
    fn constant_gray_fixed_point_grayscale() {
        let img = RasterImage::filled(16, 16, 3, 77).unwrap();
        let comp = to_grayscale_composite(&img, Orientation::Vertical).unwrap();
        let geom = BlockGeometry::exact(16, 48, 8, 8).unwrap();
        let mut spec = TransformSpec::generate(&keys(Scheme::Grayscale, 1), geom.n()).unwrap();
        spec.neg_flags = vec![false; geom.n()];
        let out = scramble(&comp, &spec, &geom).unwrap();
        assert!(out.samples().iter().all(|&s| s == 77));
    }

    #[test]
    fn full_size_block_counts() {
        let conv = CipherConfig::conventional().geometry(672, 480).unwrap();
        assert_eq!(conv.n(), 1260);
        let gray = CipherConfig::grayscale().geometry(672, 480).unwrap();
        assert_eq!(gray.n(), 15120);
        let gray_h = CipherConfig::grayscale()
            .with_orientation(Orientation::Horizontal)
            .geometry(672, 480)
            .unwrap();
        assert_eq!(gray_h.n(), 15120);
    }

    #[test]
    fn channel_consistency() {
        // Identical planes stay identical only if every channel gets the
        // same position, D4 code and negation flag.
        let base = noise(32, 32, 1, 5);
        let img = RasterImage::from_fn(32, 32, 3, |x, y, _| base.sample(x, y, 0) / 2).unwrap();
        let geom = BlockGeometry::exact(32, 32, 16, 16).unwrap();
        let mut spec = TransformSpec::generate(&keys(Scheme::Conventional, 3), 4).unwrap();
        spec.color_perms = Some(vec![ColorPerm::IDENTITY; 4]);
        let out = scramble(&img, &spec, &geom).unwrap();
        for px in out.samples().chunks_exact(3) {
            assert_eq!(px[0], px[1]);
            assert_eq!(px[1], px[2]);
        }
    }

    #[test]
    fn histogram_preserved_without_negation() {
        let img = noise(48, 32, 3, 11);
        let geom = BlockGeometry::exact(48, 32, 16, 16).unwrap();
        let mut spec = TransformSpec::generate(&keys(Scheme::Conventional, 2), 6).unwrap();
        spec.neg_flags = vec![false; 6];
        spec.color_perms = None;
        let out = scramble(&img, &spec, &geom).unwrap();
        let mut a = img.samples().to_vec();
        let mut b = out.samples().to_vec();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn grayscale_blocks_come_from_single_source_block() {
        let img = noise(16, 16, 3, 21);
        let comp = to_grayscale_composite(&img, Orientation::Vertical).unwrap();
        let geom = BlockGeometry::exact(16, 48, 8, 8).unwrap();
        let k = keys(Scheme::Grayscale, 4);
        let spec = TransformSpec::generate(&k, geom.n()).unwrap();
        let enc = encrypt_grayscale(&img, &k, &CipherConfig::grayscale()).unwrap();
        let src = split_into_blocks(&comp, &geom).unwrap();
        let dst = split_into_blocks(&enc, &geom).unwrap();
        for (i, out) in dst.iter().enumerate() {
            let expected = negative_positive(
                &spec.d4_codes[i].apply(&src[spec.permutation[i]]).unwrap(),
                spec.neg_flags[i],
            );
            assert_eq!(out, &expected);
        }
    }

    #[test]
    fn single_block_identity_spec_unchanged() {
        let img = noise(16, 16, 3, 1);
        let geom = BlockGeometry::exact(16, 16, 16, 16).unwrap();
        let spec = TransformSpec::identity(1, true);
        assert_eq!(unscramble(&img, &spec, &geom).unwrap(), img);
        assert_eq!(scramble(&img, &spec, &geom).unwrap(), img);
    }

    #[test]
    fn scheme_mismatch_rejected() {
        let img = noise(32, 32, 3, 1);
        let k = keys(Scheme::Grayscale, 1);
        assert!(matches!(
            encrypt_conventional(&img, &k, &CipherConfig::conventional()),
            Err(Error::SchemeMismatch { .. })
        ));
    }

    #[test]
    fn wrong_channel_count_rejected() {
        let gray = noise(32, 32, 1, 1);
        let k = keys(Scheme::Conventional, 1);
        assert!(matches!(
            encrypt_conventional(&gray, &k, &CipherConfig::conventional()),
            Err(Error::ChannelCount { .. })
        ));
    }

    #[test]
    fn non_divisible_rejected() {
        let img = noise(40, 32, 3, 1);
        let k = keys(Scheme::Conventional, 1);
        assert!(matches!(
            encrypt_conventional(&img, &k, &CipherConfig::conventional()),
            Err(Error::GeometryMismatch(_))
        ));
    }

    #[test]
    fn wrong_orientation_detected() {
        let img = noise(16, 16, 3, 9);
        let k = keys(Scheme::Grayscale, 6);
        let enc = encrypt_grayscale(&img, &k, &CipherConfig::grayscale()).unwrap();
        let wrong = CipherConfig::grayscale().with_orientation(Orientation::Horizontal);
        // 16x48 composite is not three horizontal planes of whole blocks
        match decrypt_grayscale(&enc, &k, &wrong) {
            Err(_) => {}
            Ok(dec) => assert_ne!(dec, img),
        }
    }

    #[test]
    fn keyspace_closed_forms() {
        assert!((estimate_keyspace(Scheme::Conventional, 1) - (4.0 + 6f64.log2())).abs() < 1e-12);
        assert!((estimate_keyspace(Scheme::Conventional, 2) - 18432f64.log2()).abs() < 1e-9);
        assert!((estimate_keyspace(Scheme::Grayscale, 2) - 9.0).abs() < 1e-12);
        assert!(estimate_keyspace(Scheme::Grayscale, 1440) > estimate_keyspace(Scheme::Conventional, 120));
    }

    #[test]
    fn keyspace_matches_enumeration() {
        // Count every distinct (permutation, codes, flags, colors) tuple
        // for n = 2 by enumeration.
        let perms = 2u64; // 2!
        let mut conv = 0u64;
        let mut gray = 0u64;
        for _p in 0..perms {
            for _d in 0..(D4::ALL.len() as u64).pow(2) {
                for _f in 0..4u64 {
                    gray += 1;
                    conv += (ColorPerm::ALL.len() as u64).pow(2);
                }
            }
        }
        assert!((estimate_keyspace(Scheme::Conventional, 2) - (conv as f64).log2()).abs() < 1e-9);
        assert!((estimate_keyspace(Scheme::Grayscale, 2) - (gray as f64).log2()).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn roundtrip_both_schemes(cols in 1usize..4, rows in 1usize..4, seed in any::<u64>(), kb in any::<u8>()) {
            let img = noise(cols * 16, rows * 16, 3, seed);
            let ck = keys(Scheme::Conventional, kb);
            let cfg = CipherConfig::conventional();
            let enc = encrypt_conventional(&img, &ck, &cfg).unwrap();
            prop_assert_eq!(decrypt_conventional(&enc, &ck, &cfg).unwrap(), img.clone());

            let gk = keys(Scheme::Grayscale, kb);
            let gcfg = CipherConfig::grayscale();
            let enc = encrypt_grayscale(&img, &gk, &gcfg).unwrap();
            prop_assert_eq!(enc.channels(), 1);
            prop_assert_eq!(decrypt_grayscale(&enc, &gk, &gcfg).unwrap(), img);
        }
    }
}
