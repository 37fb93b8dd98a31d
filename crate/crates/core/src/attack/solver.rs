use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{AssemblyResult, Placement};
use crate::raster::{BlockGeometry, RasterImage};
use crate::transform::{negative_positive, ColorPerm, D4};
use crate::{Error, Result};

/// Where the second piece sits relative to the first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Right,
    Below,
    Left,
    Above,
}

/// Which block transformations the solver searches over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    /// Pieces keep their stored orientation.
    #[default]
    PermutationOnly,
    /// Each piece may be placed in any of the eight D4 orientations.
    WithD4,
    /// Orientations plus negative-positive inversion and, for color
    /// pieces, any channel order.
    Extended,
}

impl SolverMode {
    pub const ALL: [SolverMode; 3] = [SolverMode::PermutationOnly, SolverMode::WithD4, SolverMode::Extended];

    /// Whether assemblies record an orientation per piece.
    pub fn orients(self) -> bool {
        self != SolverMode::PermutationOnly
    }

    pub fn id(self) -> &'static str {
        match self {
            SolverMode::PermutationOnly => "permutation-only",
            SolverMode::WithD4 => "with-d4",
            SolverMode::Extended => "extended",
        }
    }
}

impl std::fmt::Display for SolverMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for SolverMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        SolverMode::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| format!("unknown solver mode {s:?} (permutation-only, with-d4, extended)"))
    }
}

/// Ridge added to each seam gradient covariance before inversion.
const RIDGE: f64 = 1.0;
/// Candidates retained per seam and piece.
const SHORTLIST: usize = 12;
/// Centre of the sample range; centring on it makes negative-positive
/// inversion an exact sign flip.
const MID_GREY: f64 = 127.5;
/// Rows of the cost matrix computed per GEMM call.
const GEMM_ROWS: usize = 64;

/// Outward-facing boundary statistics of one side of a block.
struct Seam {
    channels: usize,
    /// Boundary samples centred on mid-grey, `len * channels`.
    edge: Vec<f64>,
    /// Mean outward gradient per channel.
    mean: Vec<f64>,
    /// Inverse of the regularized gradient covariance, `channels^2`.
    precision: Vec<f64>,
}

impl Seam {
    fn len(&self) -> usize {
        self.edge.len() / self.channels
    }

    /// Reads side `side` of `block` in left-to-right or top-to-bottom order.
    fn of(block: &RasterImage, side: Side) -> Self {
        let (w, h, c) = (block.width(), block.height(), block.channels());
        let (len, depth_max) = match side {
            Side::Left | Side::Right => (h, w - 1),
            Side::Above | Side::Below => (w, h - 1),
        };
        let at = |k: usize, depth: usize, ch: usize| -> f64 {
            let d = depth.min(depth_max);
            let (x, y) = match side {
                Side::Right => (w - 1 - d, k),
                Side::Left => (d, k),
                Side::Below => (k, h - 1 - d),
                Side::Above => (k, d),
            };
            block.sample(x, y, ch) as f64 - MID_GREY
        };
        let mut edge = Vec::with_capacity(len * c);
        let mut grad = Vec::with_capacity(len * c);
        for k in 0..len {
            for ch in 0..c {
                let e = at(k, 0, ch);
                edge.push(e);
                grad.push(e - at(k, 1, ch));
            }
        }
        let mut mean = vec![0.0; c];
        for k in 0..len {
            for ch in 0..c {
                mean[ch] += grad[k * c + ch];
            }
        }
        mean.iter_mut().for_each(|m| *m /= len as f64);
        let mut cov = vec![0.0; c * c];
        for k in 0..len {
            for i in 0..c {
                for j in 0..c {
                    cov[i * c + j] += (grad[k * c + i] - mean[i]) * (grad[k * c + j] - mean[j]);
                }
            }
        }
        let denom = len.saturating_sub(1).max(1) as f64;
        cov.iter_mut().for_each(|v| *v /= denom);
        for i in 0..c {
            cov[i * c + i] += RIDGE;
        }
        Self {
            channels: c,
            edge,
            mean,
            precision: invert_spd(&cov, c),
        }
    }

    fn quad(&self, d: &[f64]) -> f64 {
        let c = self.channels;
        let mut s = 0.0;
        for i in 0..c {
            for j in 0..c {
                s += d[i] * self.precision[i * c + j] * d[j];
            }
        }
        s
    }
}

fn invert_spd(m: &[f64], c: usize) -> Vec<f64> {
    match c {
        1 => vec![1.0 / m[0]],
        3 => {
            let [a, b, cc, d, e, f, g, h, i] = [m[0], m[1], m[2], m[3], m[4], m[5], m[6], m[7], m[8]];
            let co = [
                e * i - f * h,
                -(d * i - f * g),
                d * h - e * g,
                -(b * i - cc * h),
                a * i - cc * g,
                -(a * h - b * g),
                b * f - cc * e,
                -(a * f - cc * d),
                a * e - b * d,
            ];
            let det = a * co[0] + b * co[1] + cc * co[2];
            // adjugate is the transposed cofactor matrix
            (0..9).map(|k| co[(k % 3) * 3 + k / 3] / det).collect()
        }
        _ => unreachable!("blocks have one or three channels"),
    }
}

/// Dissimilarity of `first` followed by `second` across a seam: the
/// Mahalanobis distance of the gradient across the seam under each side's
/// own gradient statistics, summed in both directions.
fn seam_cost(first: &Seam, second: &Seam) -> f64 {
    let c = first.channels;
    let mut d = vec![0.0; c];
    let mut total = 0.0;
    for k in 0..first.len() {
        let x = &first.edge[k * c..(k + 1) * c];
        let y = &second.edge[k * c..(k + 1) * c];
        for ch in 0..c {
            d[ch] = y[ch] - x[ch] - first.mean[ch];
        }
        total += first.quad(&d);
        for ch in 0..c {
            d[ch] = x[ch] - y[ch] - second.mean[ch];
        }
        total += second.quad(&d);
    }
    total
}

/// Dissimilarity of placing `b` on side `side` of `a`. Lower is more
/// compatible. Both blocks must share dimensions and channel count.
pub fn pairwise_compatibility(a: &RasterImage, b: &RasterImage, side: Side) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(Error::GeometryMismatch(format!(
            "pieces {}x{}x{} and {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(match side {
        Side::Right => seam_cost(&Seam::of(a, Side::Right), &Seam::of(b, Side::Left)),
        Side::Below => seam_cost(&Seam::of(a, Side::Below), &Seam::of(b, Side::Above)),
        Side::Left => seam_cost(&Seam::of(b, Side::Right), &Seam::of(a, Side::Left)),
        Side::Above => seam_cost(&Seam::of(b, Side::Below), &Seam::of(a, Side::Above)),
    })
}

/// Seam costs rewritten as `lead_const[x] + trail_const[y] + lead[x] . trail[y]`
/// so that all pairs can be scored with one matrix product.
struct SeamTable {
    dim: usize,
    lead: Vec<f64>,
    lead_const: Vec<f64>,
    trail: Vec<f64>,
    trail_const: Vec<f64>,
}

impl SeamTable {
    fn build(blocks: &[RasterImage], lead_side: Side, trail_side: Side) -> Self {
        let c = blocks[0].channels();
        let len = match lead_side {
            Side::Left | Side::Right => blocks[0].height(),
            Side::Above | Side::Below => blocks[0].width(),
        };
        let dim = 2 * c * c + 2 * len * c + c;
        let rows: Vec<(Vec<f64>, f64, Vec<f64>, f64)> = blocks
            .par_iter()
            .map(|b| {
                let (l, lc) = lead_features(&Seam::of(b, lead_side));
                let (t, tc) = trail_features(&Seam::of(b, trail_side));
                (l, lc, t, tc)
            })
            .collect();
        let mut table = Self {
            dim,
            lead: Vec::with_capacity(rows.len() * dim),
            lead_const: Vec::with_capacity(rows.len()),
            trail: Vec::with_capacity(rows.len() * dim),
            trail_const: Vec::with_capacity(rows.len()),
        };
        for (l, lc, t, tc) in rows {
            table.lead.extend_from_slice(&l);
            table.lead_const.push(lc);
            table.trail.extend_from_slice(&t);
            table.trail_const.push(tc);
        }
        table
    }

    fn count(&self) -> usize {
        self.lead_const.len()
    }

    fn cost(&self, x: usize, y: usize) -> f64 {
        let d = self.dim;
        let dot: f64 = self.lead[x * d..(x + 1) * d]
            .iter()
            .zip(&self.trail[y * d..(y + 1) * d])
            .map(|(a, b)| a * b)
            .sum();
        self.lead_const[x] + self.trail_const[y] + dot
    }
}

fn scatter(edge: &[f64], c: usize) -> Vec<f64> {
    let mut s = vec![0.0; c * c];
    for px in edge.chunks_exact(c) {
        for i in 0..c {
            for j in 0..c {
                s[i * c + j] += px[i] * px[j];
            }
        }
    }
    s
}

fn mat_vec(m: &[f64], v: &[f64], c: usize) -> Vec<f64> {
    (0..c).map(|i| (0..c).map(|j| m[i * c + j] * v[j]).sum()).collect()
}

/// Features of the piece before the seam.
fn lead_features(s: &Seam) -> (Vec<f64>, f64) {
    let c = s.channels;
    let mut f = Vec::new();
    f.extend_from_slice(&s.precision);
    f.extend(scatter(&s.edge, c));
    let mut konst = 0.0;
    let mut shifted = vec![0.0; c];
    for x in s.edge.chunks_exact(c) {
        for ch in 0..c {
            shifted[ch] = x[ch] + s.mean[ch];
        }
        konst += s.quad(&shifted);
        f.extend(mat_vec(&s.precision, &shifted, c));
    }
    f.extend_from_slice(&s.edge);
    let mut sum = vec![0.0; c];
    for x in s.edge.chunks_exact(c) {
        for ch in 0..c {
            sum[ch] += x[ch];
        }
    }
    f.extend(sum);
    (f, konst)
}

/// Features of the piece after the seam, paired with [`lead_features`].
fn trail_features(s: &Seam) -> (Vec<f64>, f64) {
    let c = s.channels;
    let mut f = Vec::new();
    f.extend(scatter(&s.edge, c));
    f.extend_from_slice(&s.precision);
    f.extend(s.edge.iter().map(|v| -2.0 * v));
    let mut konst = 0.0;
    let mut shifted = vec![0.0; c];
    for y in s.edge.chunks_exact(c) {
        for ch in 0..c {
            shifted[ch] = y[ch] + s.mean[ch];
        }
        konst += s.quad(&shifted);
    }
    for y in s.edge.chunks_exact(c) {
        f.extend(mat_vec(&s.precision, y, c).into_iter().map(|v| -2.0 * v));
    }
    f.extend(mat_vec(&s.precision, &s.mean, c).into_iter().map(|v| -2.0 * v));
    (f, konst)
}

/// For every item, the best partners after it and before it, best first.
struct Shortlists {
    after: Vec<Vec<u32>>,
    before: Vec<Vec<u32>>,
}

/// Inserts `id` into a best-first list of at most `k` entries holding at
/// most one variant of each piece.
fn push_best(list: &mut Vec<(f64, u32)>, cost: f64, id: u32, k: usize, group: usize) {
    if list.len() == k && cost >= list[k - 1].0 {
        return;
    }
    let piece = id as usize / group;
    if let Some(pos) = list.iter().position(|e| e.1 as usize / group == piece) {
        if cost >= list[pos].0 {
            return;
        }
        list.remove(pos);
    }
    let at = list.partition_point(|e| e.0 <= cost);
    list.insert(at, (cost, id));
    list.truncate(k);
}

/// Scores items `rows` against every item of `table` and keeps, for each
/// row, the best `k` partner pieces after it. With `want_before` every item also
/// gets the best `k` rows before it. Pairs drawn from the same piece
/// (`group` ids per piece) are skipped.
fn score_rows(
    table: &SeamTable,
    rows: &[u32],
    group: usize,
    k: usize,
    want_before: bool,
) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
    let n = table.count();
    let d = table.dim;
    let mut after: Vec<Vec<(f64, u32)>> = vec![Vec::with_capacity(k + 1); rows.len()];
    let mut before: Vec<Vec<(f64, u32)>> = if want_before {
        vec![Vec::with_capacity(k + 1); n]
    } else {
        Vec::new()
    };
    let mut lead = vec![0.0f64; GEMM_ROWS * d];
    let mut buf = vec![0.0f64; GEMM_ROWS * n];
    for (chunk_no, chunk) in rows.chunks(GEMM_ROWS).enumerate() {
        for (r, &x) in chunk.iter().enumerate() {
            let x = x as usize;
            lead[r * d..(r + 1) * d].copy_from_slice(&table.lead[x * d..(x + 1) * d]);
        }
        // SAFETY: `lead` holds chunk.len() x d values row-major, `trail`
        // is read as the d x n transpose of its n x d row-major storage,
        // and `buf` has room for chunk.len() x n outputs.
        unsafe {
            matrixmultiply::dgemm(
                chunk.len(),
                d,
                n,
                1.0,
                lead.as_ptr(),
                d as isize,
                1,
                table.trail.as_ptr(),
                1,
                d as isize,
                0.0,
                buf.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        for (r, &x) in chunk.iter().enumerate() {
            let list = &mut after[chunk_no * GEMM_ROWS + r];
            let row = &buf[r * n..(r + 1) * n];
            let lc = table.lead_const[x as usize];
            let piece = x as usize / group;
            for (y, &dot) in row.iter().enumerate() {
                if y / group == piece {
                    continue;
                }
                let cost = lc + table.trail_const[y] + dot;
                push_best(list, cost, y as u32, k, group);
                if want_before {
                    push_best(&mut before[y], cost, x, k, group);
                }
            }
        }
    }
    let strip = |v: Vec<Vec<(f64, u32)>>| v.into_iter().map(|l| l.into_iter().map(|e| e.1).collect()).collect();
    (strip(after), strip(before))
}

/// Horizontal shortlists for modes that search orientations.
///
/// Seam costs are unchanged when both pieces are mirrored top to bottom,
/// both inverted, or both given the same channel order, so only one
/// variant per orbit of those symmetries is scored directly. A half turn
/// swaps the roles of the two pieces, which turns lists of right-hand
/// partners into lists of left-hand ones.
fn symmetric_shortlists(table: &SeamTable, variants: &[Variant], k: usize) -> Shortlists {
    let group = variants.len();
    let negations: &[bool] = if variants.iter().any(|v| v.negate) {
        &[false, true]
    } else {
        &[false]
    };
    let colors: Vec<Option<ColorPerm>> = if variants.iter().any(|v| v.colors.is_some()) {
        ColorPerm::ALL.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    let mut symmetries = Vec::new();
    for &c in &colors {
        for &negate in negations {
            for d4 in [D4::IDENTITY, D4::from_parts(2, true)] {
                symmetries.push(Variant { d4, negate, colors: c });
            }
        }
    }
    let action: Vec<Vec<u32>> = symmetries
        .iter()
        .map(|h| variants.iter().map(|v| h.then_after(v).index() as u32).collect())
        .collect();
    let half_turn: Vec<u32> = variants
        .iter()
        .map(|v| {
            Variant {
                d4: D4::ROT180.then_after(v.d4),
                ..*v
            }
            .index() as u32
        })
        .collect();

    // orbit representative and the symmetry reaching each variant from it
    let mut origin: Vec<Option<(usize, usize)>> = vec![None; group];
    let mut canonical = Vec::new();
    for v in 0..group {
        if origin[v].is_none() {
            for (h, act) in action.iter().enumerate() {
                origin[act[v] as usize].get_or_insert((canonical.len(), h));
            }
            canonical.push(v as u32);
        }
    }
    let pieces = table.count() / group;
    let rows: Vec<u32> = (0..pieces as u32)
        .flat_map(|p| canonical.iter().map(move |&v| p * group as u32 + v))
        .collect();
    let (scored, _) = score_rows(table, &rows, group, k, false);

    let remap = |id: u32, table: &[u32]| id - id % group as u32 + table[id as usize % group];
    let after: Vec<Vec<u32>> = (0..table.count())
        .map(|id| {
            let (pos, h) = origin[id % group].expect("every variant lies in an orbit");
            scored[id / group * canonical.len() + pos]
                .iter()
                .map(|&y| remap(y, &action[h]))
                .collect()
        })
        .collect();
    let before = (0..table.count() as u32)
        .map(|id| {
            after[remap(id, &half_turn) as usize]
                .iter()
                .map(|&x| remap(x, &half_turn))
                .collect()
        })
        .collect();
    Shortlists { after, before }
}

/// One way of presenting a piece to the solver.
#[derive(Clone, Copy, Debug)]
struct Variant {
    d4: D4,
    negate: bool,
    colors: Option<ColorPerm>,
}

impl Variant {
    /// Position in the list built by [`variants`].
    fn index(&self) -> usize {
        let colors = self.colors.map_or(0, |c| c.code() as usize);
        self.d4.code() as usize + D4::ALL.len() * (self.negate as usize + 2 * colors)
    }

    /// `self ∘ other`.
    fn then_after(&self, other: &Variant) -> Variant {
        Variant {
            d4: self.d4.then_after(other.d4),
            negate: self.negate ^ other.negate,
            colors: match (self.colors, other.colors) {
                (Some(a), Some(b)) => Some(a.then_after(b)),
                (a, b) => a.or(b),
            },
        }
    }

    fn apply(&self, piece: &RasterImage) -> Result<RasterImage> {
        let p = match self.colors {
            Some(c) => c.apply(piece)?,
            None => piece.clone(),
        };
        self.d4.apply(&negative_positive(&p, self.negate))
    }
}

/// Variants searched by `mode`, D4 code fastest so that index `v` has
/// orientation `v % 8` whenever orientations are searched.
fn variants(mode: SolverMode, channels: usize) -> Vec<Variant> {
    let plain = Variant {
        d4: D4::IDENTITY,
        negate: false,
        colors: None,
    };
    match mode {
        SolverMode::PermutationOnly => vec![plain],
        SolverMode::WithD4 => D4::ALL.iter().map(|&d4| Variant { d4, ..plain }).collect(),
        SolverMode::Extended => {
            let colors: Vec<Option<ColorPerm>> = if channels == 3 {
                ColorPerm::ALL.iter().copied().map(Some).collect()
            } else {
                vec![None]
            };
            let mut out = Vec::new();
            for &c in &colors {
                for negate in [false, true] {
                    out.extend(D4::ALL.iter().map(|&d4| Variant { d4, negate, colors: c }));
                }
            }
            out
        }
    }
}

/// Pieces expanded to every variant the mode allows, with seam tables.
/// Item `id` is variant `id % group` of piece `id / group`.
struct Catalogue {
    group: usize,
    variants: Vec<Variant>,
    horizontal: SeamTable,
    vertical: SeamTable,
    h_lists: Shortlists,
    v_lists: Shortlists,
}

impl Catalogue {
    fn build(pieces: &[RasterImage], mode: SolverMode) -> Result<Self> {
        let variants = variants(mode, pieces[0].channels());
        let group = variants.len();
        let expanded: Vec<RasterImage> = pieces
            .par_iter()
            .map(|p| variants.iter().map(|v| v.apply(p)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        let horizontal = SeamTable::build(&expanded, Side::Right, Side::Left);
        let vertical = SeamTable::build(&expanded, Side::Below, Side::Above);
        let (h_lists, v_lists) = if mode == SolverMode::PermutationOnly {
            let all: Vec<u32> = (0..horizontal.count() as u32).collect();
            let (after, before) = score_rows(&horizontal, &all, group, SHORTLIST, true);
            let h = Shortlists { after, before };
            let (after, before) = score_rows(&vertical, &all, group, SHORTLIST, true);
            (h, Shortlists { after, before })
        } else {
            let h = symmetric_shortlists(&horizontal, &variants, SHORTLIST);
            // Turning a vertical pair a quarter turn counter-clockwise makes
            // it a horizontal pair, so vertical lists follow from horizontal ones.
            let d4_count = D4::ALL.len() as u32;
            let turn = |id: u32, by: D4| -> u32 {
                let o = D4::new((id % d4_count) as u8).expect("orientation id");
                id - id % d4_count + by.then_after(o).code() as u32
            };
            let map = |lists: &Vec<Vec<u32>>| -> Vec<Vec<u32>> {
                (0..lists.len() as u32)
                    .map(|id| {
                        lists[turn(id, D4::ROT270) as usize]
                            .iter()
                            .map(|&o| turn(o, D4::ROT90))
                            .collect()
                    })
                    .collect()
            };
            let v = Shortlists {
                after: map(&h.after),
                before: map(&h.before),
            };
            (h, v)
        };
        Ok(Self {
            group,
            variants,
            horizontal,
            vertical,
            h_lists,
            v_lists,
        })
    }

    fn piece(&self, id: u32) -> usize {
        id as usize / self.group
    }

    fn variant(&self, id: u32) -> &Variant {
        &self.variants[id as usize % self.group]
    }
}

#[derive(Clone, Copy, Debug)]
struct Bounds {
    min_r: i32,
    max_r: i32,
    min_c: i32,
    max_c: i32,
}

impl Bounds {
    fn admits(&self, (r, c): (i32, i32), rows: usize, cols: usize) -> bool {
        let h = self.max_r.max(r) - self.min_r.min(r) + 1;
        let w = self.max_c.max(c) - self.min_c.min(c) + 1;
        h as usize <= rows && w as usize <= cols
    }

    fn include(&mut self, (r, c): (i32, i32)) {
        self.min_r = self.min_r.min(r);
        self.max_r = self.max_r.max(r);
        self.min_c = self.min_c.min(c);
        self.max_c = self.max_c.max(c);
    }
}

/// Where a candidate goes relative to an already placed owner piece.
#[derive(Clone, Copy)]
enum Link {
    RightOf,
    LeftOf,
    Below,
    Above,
}

struct Board<'a> {
    cat: &'a mut Catalogue,
    rows: usize,
    cols: usize,
    placed: BTreeMap<(i32, i32), u32>,
    used: Vec<bool>,
    bounds: Bounds,
    /// Empty cells next to placed ones with their best candidate.
    frontier: BTreeMap<(i32, i32), Option<(f64, u32)>>,
}

const NEIGHBORS: [(i32, i32); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

impl<'a> Board<'a> {
    fn new(cat: &'a mut Catalogue, n: usize, rows: usize, cols: usize) -> Self {
        Self {
            cat,
            rows,
            cols,
            placed: BTreeMap::new(),
            used: vec![false; n],
            bounds: Bounds {
                min_r: 0,
                max_r: 0,
                min_c: 0,
                max_c: 0,
            },
            frontier: BTreeMap::new(),
        }
    }

    /// Mean seam cost of `id` at `cell` against its placed neighbors.
    fn score(&self, (r, c): (i32, i32), id: u32) -> f64 {
        let (mut total, mut count) = (0.0, 0);
        let id = id as usize;
        if let Some(&x) = self.placed.get(&(r, c - 1)) {
            total += self.cat.horizontal.cost(x as usize, id);
            count += 1;
        }
        if let Some(&z) = self.placed.get(&(r, c + 1)) {
            total += self.cat.horizontal.cost(id, z as usize);
            count += 1;
        }
        if let Some(&x) = self.placed.get(&(r - 1, c)) {
            total += self.cat.vertical.cost(x as usize, id);
            count += 1;
        }
        if let Some(&z) = self.placed.get(&(r + 1, c)) {
            total += self.cat.vertical.cost(id, z as usize);
            count += 1;
        }
        total / count as f64
    }

    /// Seam cost between `owner` and `candidate` across `link`.
    fn link_cost(&self, link: Link, owner: u32, candidate: u32) -> f64 {
        let (o, c) = (owner as usize, candidate as usize);
        match link {
            Link::RightOf => self.cat.horizontal.cost(o, c),
            Link::LeftOf => self.cat.horizontal.cost(c, o),
            Link::Below => self.cat.vertical.cost(o, c),
            Link::Above => self.cat.vertical.cost(c, o),
        }
    }

    fn list_mut(&mut self, link: Link, owner: u32) -> &mut Vec<u32> {
        let lists = match link {
            Link::RightOf => &mut self.cat.h_lists.after,
            Link::LeftOf => &mut self.cat.h_lists.before,
            Link::Below => &mut self.cat.v_lists.after,
            Link::Above => &mut self.cat.v_lists.before,
        };
        &mut lists[owner as usize]
    }

    /// Rebuilds an exhausted shortlist from the pieces still unused.
    fn refill(&mut self, link: Link, owner: u32) {
        let group = self.cat.group;
        let mut best = Vec::with_capacity(SHORTLIST + 1);
        for piece in (0..self.used.len()).filter(|&p| !self.used[p]) {
            for id in (piece * group) as u32..((piece + 1) * group) as u32 {
                push_best(&mut best, self.link_cost(link, owner, id), id, SHORTLIST, group);
            }
        }
        *self.list_mut(link, owner) = best.into_iter().map(|e| e.1).collect();
    }

    fn evaluate(&mut self, (r, c): (i32, i32)) -> Option<(f64, u32)> {
        let links = [
            (Link::RightOf, (r, c - 1)),
            (Link::LeftOf, (r, c + 1)),
            (Link::Below, (r - 1, c)),
            (Link::Above, (r + 1, c)),
        ];
        let mut candidates: Vec<u32> = Vec::new();
        for (link, at) in links {
            let Some(&owner) = self.placed.get(&at) else {
                continue;
            };
            let before = candidates.len();
            let list = self.list_mut(link, owner).clone();
            candidates.extend(list.into_iter().filter(|&id| !self.used[self.cat.piece(id)]));
            if candidates.len() == before {
                self.refill(link, owner);
                candidates.extend_from_slice(self.list_mut(link, owner));
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        candidates
            .into_iter()
            .map(|id| (self.score((r, c), id), id))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
    }

    fn place(&mut self, cell: (i32, i32), id: u32) {
        let piece = self.cat.piece(id);
        self.placed.insert(cell, id);
        self.used[piece] = true;
        self.bounds.include(cell);
        self.frontier.remove(&cell);
        let (rows, cols, bounds) = (self.rows, self.cols, self.bounds);
        self.frontier.retain(|&k, _| bounds.admits(k, rows, cols));
        let mut stale: Vec<(i32, i32)> = self
            .frontier
            .iter()
            .filter(|(_, best)| best.is_some_and(|(_, b)| self.cat.piece(b) == piece))
            .map(|(&k, _)| k)
            .collect();
        for (dr, dc) in NEIGHBORS {
            let next = (cell.0 + dr, cell.1 + dc);
            if !self.placed.contains_key(&next) && self.bounds.admits(next, rows, cols) {
                stale.push(next);
            }
        }
        if self.placed.len() == self.used.len() {
            return;
        }
        for k in stale {
            let best = self.evaluate(k);
            self.frontier.insert(k, best);
        }
    }

    fn next_move(&self) -> Option<((i32, i32), u32)> {
        self.frontier
            .iter()
            .filter_map(|(&k, best)| best.map(|(s, id)| (s, k, id)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, k, id)| (k, id))
    }
}

/// Best mutually preferred horizontal pair, or failing that the cheapest
/// first horizontal choice.
fn seed(cat: &Catalogue) -> u32 {
    let h = &cat.horizontal;
    let mut best: Option<(bool, f64, u32)> = None;
    for x in 0..h.count() as u32 {
        let Some(&y) = cat.h_lists.after[x as usize].first() else {
            continue;
        };
        let mutual = cat.h_lists.before[y as usize].first() == Some(&x);
        let cost = h.cost(x as usize, y as usize);
        let better = match best {
            None => true,
            Some((m, c, _)) => (mutual, -cost) > (m, -c),
        };
        if better {
            best = Some((mutual, cost, x));
        }
    }
    best.map_or(0, |b| b.2)
}

/// Greedy jigsaw assembly of equally sized `pieces` into `grid`.
///
/// Starting from a confident pair, repeatedly fills the frontier cell whose
/// best remaining candidate has the lowest mean seam cost against its
/// placed neighbors, never letting the assembly outgrow the grid.
/// Modes that search orientations require square pieces.
pub fn greedy_assemble(pieces: &[RasterImage], grid: &BlockGeometry, mode: SolverMode) -> Result<AssemblyResult> {
    let n = grid.n();
    if pieces.len() != n {
        return Err(Error::GeometryMismatch(format!(
            "{} pieces for {} cells",
            pieces.len(),
            n
        )));
    }
    let first = &pieces[0];
    if pieces
        .iter()
        .any(|p| p.width() != grid.block_w || p.height() != grid.block_h || p.channels() != first.channels())
    {
        return Err(Error::GeometryMismatch(format!(
            "pieces must all be {}x{} with equal channel counts",
            grid.block_w, grid.block_h
        )));
    }
    if mode.orients() && grid.block_w != grid.block_h {
        return Err(Error::InvalidGeometry(format!(
            "orientation search needs square pieces, got {}x{}",
            grid.block_w, grid.block_h
        )));
    }
    if n == 1 {
        let cells = vec![Placement {
            piece: 0,
            orientation: mode.orients().then_some(D4::IDENTITY),
        }];
        return AssemblyResult::new(*grid, cells);
    }

    let mut cat = Catalogue::build(pieces, mode)?;
    let start = seed(&cat);
    let mut board = Board::new(&mut cat, n, grid.rows, grid.cols);
    board.place((0, 0), start);
    while board.placed.len() < n {
        let (cell, id) = board
            .next_move()
            .expect("a connected partial assembly inside the grid always has an open neighbor");
        board.place(cell, id);
    }

    let b = board.bounds;
    let mut cells = vec![
        Placement {
            piece: 0,
            orientation: None
        };
        n
    ];
    for (&(r, c), &id) in &board.placed {
        let idx = (r - b.min_r) as usize * grid.cols + (c - b.min_c) as usize;
        cells[idx] = Placement {
            piece: board.cat.piece(id),
            orientation: mode.orients().then(|| board.cat.variant(id).d4),
        };
    }
    AssemblyResult::new(*grid, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::split_into_blocks;
    use proptest::prelude::*;

    fn smooth(w: usize, h: usize, c: usize) -> RasterImage {
        RasterImage::from_fn(w, h, c, |x, y, ch| {
            let v = 60.0
                + 40.0 * ((x as f64) * 0.21 + ch as f64).sin()
                + 35.0 * ((y as f64) * 0.17).cos()
                + 0.8 * (x + 2 * y) as f64;
            v.clamp(0.0, 255.0) as u8
        })
        .unwrap()
    }

    #[test]
    fn true_neighbor_is_cheapest() {
        let img = smooth(48, 16, 3);
        let g = BlockGeometry::exact(48, 16, 16, 16).unwrap();
        let b = split_into_blocks(&img, &g).unwrap();
        let right = pairwise_compatibility(&b[0], &b[1], Side::Right).unwrap();
        let wrong = pairwise_compatibility(&b[0], &b[2], Side::Right).unwrap();
        assert!(right < wrong);
        assert_eq!(
            pairwise_compatibility(&b[1], &b[0], Side::Left).unwrap(),
            pairwise_compatibility(&b[0], &b[1], Side::Right).unwrap()
        );
    }

    #[test]
    fn size_mismatch_rejected() {
        let a = RasterImage::filled(4, 4, 1, 0).unwrap();
        let b = RasterImage::filled(4, 2, 1, 0).unwrap();
        let c = RasterImage::filled(4, 4, 3, 0).unwrap();
        assert!(pairwise_compatibility(&a, &b, Side::Right).is_err());
        assert!(pairwise_compatibility(&a, &c, Side::Below).is_err());
    }

    #[test]
    fn inverse_three_by_three() {
        let m = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let inv = invert_spd(&m, 3);
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| m[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn expanded_form_matches_direct(
            c in prop_oneof![Just(1usize), Just(3usize)],
            seed_a in any::<u64>(),
            seed_b in any::<u64>(),
        ) {
            let noise = |s: u64| RasterImage::from_fn(6, 6, c, |x, y, ch| {
                let v = s.wrapping_mul(6364136223846793005)
                    .wrapping_add((x * 131 + y * 17 + ch * 7) as u64)
                    .wrapping_mul(1442695040888963407);
                (v >> 56) as u8
            }).unwrap();
            let (a, b) = (noise(seed_a), noise(seed_b));
            let blocks = vec![a.clone(), b.clone()];
            let h = SeamTable::build(&blocks, Side::Right, Side::Left);
            let v = SeamTable::build(&blocks, Side::Below, Side::Above);
            let direct_h = pairwise_compatibility(&a, &b, Side::Right).unwrap();
            let direct_v = pairwise_compatibility(&a, &b, Side::Below).unwrap();
            prop_assert!((h.cost(0, 1) - direct_h).abs() <= 1e-6 * direct_h.abs().max(1.0));
            prop_assert!((v.cost(0, 1) - direct_v).abs() <= 1e-6 * direct_v.abs().max(1.0));
        }

        #[test]
        fn vertical_equals_turned_horizontal(seed_a in any::<u64>(), seed_b in any::<u64>()) {
            let noise = |s: u64| RasterImage::from_fn(5, 5, 3, |x, y, ch| {
                ((s >> ((x + y + ch) % 8 * 8)) as u8).wrapping_add((x * 37 + y * 11) as u8)
            }).unwrap();
            let (a, b) = (noise(seed_a), noise(seed_b));
            for o in D4::ALL {
                for u in D4::ALL {
                    let x = o.apply(&a).unwrap();
                    let y = u.apply(&b).unwrap();
                    let vert = pairwise_compatibility(&x, &y, Side::Below).unwrap();
                    let xt = D4::ROT270.then_after(o).apply(&a).unwrap();
                    let yt = D4::ROT270.then_after(u).apply(&b).unwrap();
                    let horiz = pairwise_compatibility(&xt, &yt, Side::Right).unwrap();
                    prop_assert!((vert - horiz).abs() <= 1e-9 * vert.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn shortlists_agree_with_brute_force() {
        let blocks: Vec<RasterImage> = (0..70)
            .map(|i| {
                RasterImage::from_fn(4, 4, 1, |x, y, _| ((i * 53 + x * 29 + y * 71 + x * y * i) % 251) as u8).unwrap()
            })
            .collect();
        let t = SeamTable::build(&blocks, Side::Right, Side::Left);
        let all: Vec<u32> = (0..blocks.len() as u32).collect();
        let (after, _) = score_rows(&t, &all, 1, 5, false);
        for x in 0..blocks.len() {
            let mut all: Vec<(f64, u32)> = (0..blocks.len())
                .filter(|&y| y != x)
                .map(|y| {
                    (
                        pairwise_compatibility(&blocks[x], &blocks[y], Side::Right).unwrap(),
                        y as u32,
                    )
                })
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let expected: Vec<f64> = all.iter().take(5).map(|e| e.0).collect();
            let got: Vec<f64> = after[x]
                .iter()
                .map(|&y| all.iter().find(|e| e.1 == y).unwrap().0)
                .collect();
            for (e, g) in expected.iter().zip(&got) {
                assert!((e - g).abs() <= 1e-6 * e.abs().max(1.0));
            }
        }
    }

    #[test]
    fn symmetric_shortlists_agree_with_brute_force() {
        let pieces: Vec<RasterImage> = (0..16)
            .map(|i| {
                RasterImage::from_fn(4, 4, 3, |x, y, c| {
                    ((i * 41 + x * 23 + y * 67 + c * 89 + x * y * c) % 256) as u8
                })
                .unwrap()
            })
            .collect();
        for mode in [SolverMode::WithD4, SolverMode::Extended] {
            let cat = Catalogue::build(&pieces, mode).unwrap();
            let t = &cat.horizontal;
            let g = cat.group;
            let k = SHORTLIST;
            // best variant of each other piece, then the best k pieces
            let best = |cost: &dyn Fn(usize) -> f64, id: usize| {
                let mut c: Vec<f64> = (0..t.count() / g)
                    .filter(|&q| q != id / g)
                    .map(|q| (q * g..(q + 1) * g).map(cost).fold(f64::INFINITY, f64::min))
                    .collect();
                c.sort_by(f64::total_cmp);
                c.truncate(k);
                c
            };
            for id in 0..t.count() {
                let want_after = best(&|y| t.cost(id, y), id);
                let want_before = best(&|x| t.cost(x, id), id);
                let got_after: Vec<f64> = cat.h_lists.after[id].iter().map(|&y| t.cost(id, y as usize)).collect();
                let got_before: Vec<f64> = cat.h_lists.before[id].iter().map(|&x| t.cost(x as usize, id)).collect();
                for (w, got) in [(want_after, got_after), (want_before, got_before)] {
                    assert_eq!(w.len(), got.len());
                    let mut got = got;
                    got.sort_by(f64::total_cmp);
                    for (a, b) in w.iter().zip(&got) {
                        assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{mode:?} {a} {b}");
                    }
                }
            }
        }
    }

    fn solve(img: &RasterImage, side: usize, mode: SolverMode) -> (f64, f64) {
        let g = BlockGeometry::exact(img.width(), img.height(), side, side).unwrap();
        let pieces = split_into_blocks(img, &g).unwrap();
        let truth = AssemblyResult::identity(g, mode.orients());
        let got = greedy_assemble(&pieces, &g, mode).unwrap();
        (
            super::super::metrics::direct_comparison(&got, &truth).unwrap(),
            super::super::metrics::neighbor_comparison(&got, &truth).unwrap(),
        )
    }

    #[test]
    fn reassembles_shuffled_smooth_image() {
        let img = smooth(96, 64, 3);
        let (dc, nc) = solve(&img, 16, SolverMode::PermutationOnly);
        assert!(dc > 0.9 && nc > 0.9, "dc {dc} nc {nc}");
    }

    #[test]
    fn single_piece_and_input_checks() {
        let img = smooth(8, 8, 1);
        let g = BlockGeometry::exact(8, 8, 8, 8).unwrap();
        let r = greedy_assemble(std::slice::from_ref(&img), &g, SolverMode::WithD4).unwrap();
        assert_eq!(r.cells()[0].orientation, Some(D4::IDENTITY));
        assert!(greedy_assemble(&[img.clone(), img.clone()], &g, SolverMode::PermutationOnly).is_err());
        let g2 = BlockGeometry::exact(8, 8, 8, 4).unwrap();
        let pieces = split_into_blocks(&smooth(8, 8, 1), &g2).unwrap();
        assert!(greedy_assemble(&pieces, &g2, SolverMode::WithD4).is_err());
        assert!(greedy_assemble(&pieces, &g2, SolverMode::PermutationOnly).is_ok());
    }

    #[test]
    fn deterministic() {
        let img = smooth(64, 48, 1);
        let g = BlockGeometry::exact(64, 48, 8, 8).unwrap();
        let pieces = split_into_blocks(&img, &g).unwrap();
        let a = greedy_assemble(&pieces, &g, SolverMode::WithD4).unwrap();
        let b = greedy_assemble(&pieces, &g, SolverMode::WithD4).unwrap();
        assert_eq!(a, b);
    }
}
