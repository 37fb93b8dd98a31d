//! Per-block transforms: dihedral rotation/flip, negative–positive
//! inversion and color-channel shuffling.

use crate::raster::{RasterImage, MAX_SAMPLE};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// One of the eight symmetries of a square block.
///
/// `code = rotation + 4 * flip`: the block is first mirrored left-right
/// when `flip` is set, then rotated clockwise by `rotation` quarter turns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct D4(u8);

impl D4 {
    pub const IDENTITY: D4 = D4(0);
    pub const ROT90: D4 = D4(1);
    pub const ROT180: D4 = D4(2);
    pub const ROT270: D4 = D4(3);
    pub const FLIP: D4 = D4(4);
    pub const ALL: [D4; 8] = [D4(0), D4(1), D4(2), D4(3), D4(4), D4(5), D4(6), D4(7)];

    pub fn new(code: u8) -> Option<Self> {
        (code < 8).then_some(Self(code))
    }

    pub fn from_parts(quarter_turns: u8, flip: bool) -> Self {
        Self((quarter_turns % 4) + if flip { 4 } else { 0 })
    }

    pub fn code(self) -> u8 {
        self.0
    }

    /// Clockwise quarter turns.
    pub fn quarter_turns(self) -> u8 {
        self.0 & 3
    }

    pub fn flipped(self) -> bool {
        self.0 & 4 != 0
    }

    /// Whether the transform swaps width and height.
    pub fn transposes(self) -> bool {
        self.0 & 1 != 0
    }

    pub fn inverse(self) -> Self {
        if self.flipped() {
            self
        } else {
            Self::from_parts((4 - self.quarter_turns()) % 4, false)
        }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn then_after(self, other: D4) -> D4 {
        // R^a F^f R^b F^g = R^(a ± b) F^(f xor g), minus when f is set
        let turns = if self.flipped() {
            self.quarter_turns() + 4 - other.quarter_turns()
        } else {
            self.quarter_turns() + other.quarter_turns()
        };
        Self::from_parts(turns, self.flipped() ^ other.flipped())
    }

    pub fn apply(self, block: &RasterImage) -> Result<RasterImage> {
        if self.transposes() && block.width() != block.height() {
            return Err(Error::InvalidGeometry(format!(
                "quarter-turn rotation of a non-square {}x{} block",
                block.width(),
                block.height()
            )));
        }
        let mut out = if self.flipped() {
            flip_horizontal(block)
        } else {
            block.clone()
        };
        for _ in 0..self.quarter_turns() {
            out = rotate_cw(&out);
        }
        Ok(out)
    }
}

impl TryFrom<u8> for D4 {
    type Error = String;

    fn try_from(code: u8) -> std::result::Result<Self, Self::Error> {
        D4::new(code).ok_or_else(|| format!("dihedral code {code} outside [0, 8)"))
    }
}

impl From<D4> for u8 {
    fn from(d: D4) -> u8 {
        d.0
    }
}

fn flip_horizontal(block: &RasterImage) -> RasterImage {
    let (w, c) = (block.width(), block.channels());
    RasterImage::from_fn(w, block.height(), c, |x, y, ch| block.sample(w - 1 - x, y, ch)).expect("same geometry")
}

fn rotate_cw(block: &RasterImage) -> RasterImage {
    let h = block.height();
    RasterImage::from_fn(h, block.width(), block.channels(), |x, y, ch| {
        block.sample(y, h - 1 - x, ch)
    })
    .expect("transposed geometry")
}

/// Negative–positive transform: with `flag` set every sample `p` becomes
/// `p XOR (2^L - 1)`, otherwise the block is returned unchanged.
pub fn negative_positive(block: &RasterImage, flag: bool) -> RasterImage {
    let mut out = block.clone();
    if flag {
        for s in out.samples_mut() {
            *s ^= MAX_SAMPLE;
        }
    }
    out
}

/// A permutation of the three color channels, indexed lexicographically:
/// 0 = RGB, 1 = RBG, 2 = GRB, 3 = GBR, 4 = BRG, 5 = BGR.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ColorPerm(u8);

const CHANNEL_ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

impl ColorPerm {
    pub const IDENTITY: ColorPerm = ColorPerm(0);
    pub const ALL: [ColorPerm; 6] = [
        ColorPerm(0),
        ColorPerm(1),
        ColorPerm(2),
        ColorPerm(3),
        ColorPerm(4),
        ColorPerm(5),
    ];

    pub fn new(code: u8) -> Option<Self> {
        (code < 6).then_some(Self(code))
    }

    pub fn code(self) -> u8 {
        self.0
    }

    /// Output channel `k` takes input channel `order()[k]`.
    pub fn order(self) -> [usize; 3] {
        CHANNEL_ORDERS[self.0 as usize]
    }

    pub fn inverse(self) -> Self {
        let order = self.order();
        let mut inv = [0usize; 3];
        for (k, &src) in order.iter().enumerate() {
            inv[src] = k;
        }
        let code = CHANNEL_ORDERS
            .iter()
            .position(|o| *o == inv)
            .expect("inverse of a permutation is a permutation");
        Self(code as u8)
    }

    /// `self ∘ other`: shuffle by `other` first, then by `self`.
    pub fn then_after(self, other: ColorPerm) -> ColorPerm {
        let (outer, inner) = (self.order(), other.order());
        let order = [inner[outer[0]], inner[outer[1]], inner[outer[2]]];
        let code = CHANNEL_ORDERS
            .iter()
            .position(|o| *o == order)
            .expect("composition of permutations is a permutation");
        Self(code as u8)
    }

    pub fn apply(self, block: &RasterImage) -> Result<RasterImage> {
        block.require_channels(3)?;
        let order = self.order();
        let mut out = block.clone();
        for (dst, src) in out
            .samples_mut()
            .chunks_exact_mut(3)
            .zip(block.samples().chunks_exact(3))
        {
            for k in 0..3 {
                dst[k] = src[order[k]];
            }
        }
        Ok(out)
    }
}

impl TryFrom<u8> for ColorPerm {
    type Error = String;

    fn try_from(code: u8) -> std::result::Result<Self, Self::Error> {
        ColorPerm::new(code).ok_or_else(|| format!("color permutation {code} outside [0, 6)"))
    }
}

impl From<ColorPerm> for u8 {
    fn from(p: ColorPerm) -> u8 {
        p.0
    }
}

/// Shuffles the color channels of a 3-channel block.
pub fn shuffle_colors(block: &RasterImage, perm: ColorPerm) -> Result<RasterImage> {
    perm.apply(block)
}
