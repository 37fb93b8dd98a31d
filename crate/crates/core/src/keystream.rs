//! Key material and the keyed generators behind every per-block decision.
//!
//! Subkeys K1..K4 are HMAC-SHA256 outputs of the master key over a tag that
//! names the scheme and the subkey. Each subkey seeds its own ChaCha20
//! stream; uniform integers are drawn from 32-bit words by rejection
//! sampling, so no generator has modulo bias and every draw sequence is
//! fixed across platforms.

use crate::transform::{ColorPerm, D4};
use crate::{Error, Result};
use hmac::{Hmac, Mac};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::Sha256;

/// Identifies subkey derivation, stream cipher and sampling rules. Stored
/// in encrypted-image metadata.
pub const KEYSTREAM_ALGORITHM_ID: &str = "hmac-sha256-subkeys/chacha20-rejection/v1";

const KEY_LEN: usize = 32;

/// A 256-bit secret. `Debug` never prints the bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey([u8; KEY_LEN]);

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

impl SecretKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; KEY_LEN] = bytes
            .try_into()
            .map_err(|_| Error::KeyFormat(format!("expected {KEY_LEN} bytes, got {}", bytes.len())))?;
        Ok(Self(arr))
    }

    /// Parses key-file content: 32 raw bytes, or 64 hex digits with an
    /// optional trailing newline.
    pub fn from_key_file(content: &[u8]) -> Result<Self> {
        if content.len() == KEY_LEN {
            return Self::from_bytes(content);
        }
        let text = content
            .strip_suffix(b"\r\n")
            .or_else(|| content.strip_suffix(b"\n"))
            .unwrap_or(content);
        if text.len() != 2 * KEY_LEN {
            return Err(Error::KeyFormat(format!(
                "key file holds {} bytes; expected {KEY_LEN} raw bytes or {} hex digits",
                content.len(),
                2 * KEY_LEN
            )));
        }
        let mut out = [0u8; KEY_LEN];
        for (i, pair) in text.chunks_exact(2).enumerate() {
            let s = std::str::from_utf8(pair).map_err(|_| Error::KeyFormat("non-ASCII character in hex key".into()))?;
            out[i] = u8::from_str_radix(s, 16).map_err(|_| Error::KeyFormat(format!("invalid hex digits {s:?}")))?;
        }
        Ok(Self(out))
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// RGB blocks, four steps including the color shuffle.
    Conventional,
    /// Single-channel composite of the R, G, B planes, no color shuffle.
    Grayscale,
}

impl Scheme {
    pub fn id(self) -> &'static str {
        match self {
            Scheme::Conventional => "conventional",
            Scheme::Grayscale => "grayscale",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "conventional" => Ok(Scheme::Conventional),
            "grayscale" => Ok(Scheme::Grayscale),
            other => Err(format!("unknown scheme {other:?}")),
        }
    }
}

/// What a subkey drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    Permute,
    RotateInvert,
    NegPos,
    ColorShuffle,
}

impl Purpose {
    pub const ALL: [Purpose; 4] = [
        Purpose::Permute,
        Purpose::RotateInvert,
        Purpose::NegPos,
        Purpose::ColorShuffle,
    ];

    fn index(self) -> usize {
        self as usize
    }

    fn tag(self) -> &'static str {
        ["K1", "K2", "K3", "K4"][self.index()]
    }
}

/// Derives K1..K4 from a 32-byte master secret.
pub fn derive_subkeys(master: &[u8], scheme: Scheme) -> Result<[SecretKey; 4]> {
    let master = SecretKey::from_bytes(master)?;
    Ok(Purpose::ALL.map(|purpose| {
        let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(master.as_bytes()).expect("HMAC accepts any key length");
        mac.update(b"bscramble/subkey/v1/");
        mac.update(scheme.id().as_bytes());
        mac.update(b"/");
        mac.update(purpose.tag().as_bytes());
        let digest = mac.finalize().into_bytes();
        SecretKey::from_bytes(&digest).expect("SHA-256 output is 32 bytes")
    }))
}

/// The four subkeys for one scheme.
///
/// K4 is carried for the grayscale scheme too but never read.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeySet {
    scheme: Scheme,
    subkeys: [SecretKey; 4],
}

impl KeySet {
    pub fn derive(master: &SecretKey, scheme: Scheme) -> Self {
        Self {
            scheme,
            subkeys: derive_subkeys(master.as_bytes(), scheme).expect("master length checked"),
        }
    }

    /// Uses four independent keys directly instead of deriving them.
    pub fn from_subkeys(scheme: Scheme, subkeys: [SecretKey; 4]) -> Self {
        Self { scheme, subkeys }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn subkey(&self, purpose: Purpose) -> &SecretKey {
        &self.subkeys[purpose.index()]
    }

    pub fn subkeys(&self) -> &[SecretKey; 4] {
        &self.subkeys
    }
}

/// Uniform draws from one subkey.
pub struct Keystream {
    rng: ChaCha20Rng,
}

impl Keystream {
    pub fn new(subkey: &SecretKey, purpose: Purpose) -> Self {
        let mut rng = ChaCha20Rng::from_seed(*subkey.as_bytes());
        rng.set_stream(purpose.index() as u64);
        Self { rng }
    }

    pub fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    /// Uniform integer in `[0, bound)`.
    pub fn below(&mut self, bound: u32) -> u32 {
        assert!(bound > 0, "empty range");
        // 2^32 mod bound; words below it belong to a partial final bucket
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let v = self.rng.next_u32();
            if v >= threshold {
                return v % bound;
            }
        }
    }
}

fn require_blocks(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidGeometry("zero blocks".into()));
    }
    if n > u32::MAX as usize {
        return Err(Error::InvalidGeometry(format!("{n} blocks exceed the 32-bit sampler")));
    }
    Ok(())
}

/// Keyed Fisher–Yates shuffle of `[0, n)`, swapping from the highest index down.
pub fn gen_permutation(k1: &SecretKey, n: usize) -> Result<Vec<usize>> {
    require_blocks(n)?;
    let mut ks = Keystream::new(k1, Purpose::Permute);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = ks.below(i as u32 + 1) as usize;
        perm.swap(i, j);
    }
    Ok(perm)
}

pub fn gen_d4_codes(k2: &SecretKey, n: usize) -> Result<Vec<D4>> {
    require_blocks(n)?;
    let mut ks = Keystream::new(k2, Purpose::RotateInvert);
    Ok((0..n).map(|_| D4::new(ks.below(8) as u8).expect("below 8")).collect())
}

pub fn gen_neg_flags(k3: &SecretKey, n: usize) -> Result<Vec<bool>> {
    require_blocks(n)?;
    let mut ks = Keystream::new(k3, Purpose::NegPos);
    Ok((0..n).map(|_| ks.below(2) == 1).collect())
}

pub fn gen_color_perms(k4: &SecretKey, n: usize) -> Result<Vec<ColorPerm>> {
    require_blocks(n)?;
    let mut ks = Keystream::new(k4, Purpose::ColorShuffle);
    Ok((0..n)
        .map(|_| ColorPerm::new(ks.below(6) as u8).expect("below 6"))
        .collect())
}

/// Every keyed decision for one image of `n` blocks.
///
/// Output block `i` is input block `permutation[i]` after the D4 transform
/// `d4_codes[i]`, the negative–positive step `neg_flags[i]` and, for the
/// conventional scheme, the channel permutation `color_perms[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub permutation: Vec<usize>,
    pub d4_codes: Vec<D4>,
    pub neg_flags: Vec<bool>,
    pub color_perms: Option<Vec<ColorPerm>>,
}

impl TransformSpec {
    pub fn generate(keys: &KeySet, n: usize) -> Result<Self> {
        let color_perms = match keys.scheme() {
            Scheme::Conventional => Some(gen_color_perms(keys.subkey(Purpose::ColorShuffle), n)?),
            Scheme::Grayscale => None,
        };
        Ok(Self {
            permutation: gen_permutation(keys.subkey(Purpose::Permute), n)?,
            d4_codes: gen_d4_codes(keys.subkey(Purpose::RotateInvert), n)?,
            neg_flags: gen_neg_flags(keys.subkey(Purpose::NegPos), n)?,
            color_perms,
        })
    }

    /// A spec that moves nothing: identity permutation and transforms.
    pub fn identity(n: usize, with_colors: bool) -> Self {
        Self {
            permutation: (0..n).collect(),
            d4_codes: vec![D4::IDENTITY; n],
            neg_flags: vec![false; n],
            color_perms: with_colors.then(|| vec![ColorPerm::IDENTITY; n]),
        }
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        let lens_ok = self.permutation.len() == n
            && self.d4_codes.len() == n
            && self.neg_flags.len() == n
            && self.color_perms.as_ref().is_none_or(|c| c.len() == n);
        if !lens_ok {
            return Err(Error::GeometryMismatch(format!(
                "transform spec does not cover {n} blocks"
            )));
        }
        if !is_bijection(&self.permutation) {
            return Err(Error::InvalidGeometry("permutation is not a bijection".into()));
        }
        Ok(())
    }

    /// Position of each source block in the output: `inverse[permutation[i]] = i`.
    pub fn inverse_permutation(&self) -> Vec<usize> {
        let mut inv = vec![0; self.permutation.len()];
        for (i, &p) in self.permutation.iter().enumerate() {
            inv[p] = i;
        }
        inv
    }
}

pub fn is_bijection(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    perm.iter()
        .all(|&p| p < perm.len() && !std::mem::replace(&mut seen[p], true))
}
