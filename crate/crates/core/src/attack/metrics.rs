use crate::keystream::TransformSpec;
use crate::raster::{assemble_blocks, BlockGeometry, RasterImage};
use crate::transform::D4;
use crate::{Error, Result};
use serde::Serialize;

/// The piece in one grid cell and, when the solver tracks it, the
/// orientation it was placed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Placement {
    pub piece: usize,
    pub orientation: Option<D4>,
}

impl Placement {
    fn orientation_agrees(&self, truth: &Placement) -> bool {
        match (self.orientation, truth.orientation) {
            (Some(a), Some(b)) => a == b,
            _ => true,
        }
    }
}

/// A complete placement of `grid.n()` pieces, cells in row-major order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssemblyResult {
    grid: BlockGeometry,
    cells: Vec<Placement>,
}

impl AssemblyResult {
    pub fn new(grid: BlockGeometry, cells: Vec<Placement>) -> Result<Self> {
        if cells.len() != grid.n() {
            return Err(Error::GeometryMismatch(format!(
                "{} placements for {} cells",
                cells.len(),
                grid.n()
            )));
        }
        let pieces: Vec<usize> = cells.iter().map(|c| c.piece).collect();
        if !crate::keystream::is_bijection(&pieces) {
            return Err(Error::InvalidGeometry(
                "placement is not a bijection over pieces".into(),
            ));
        }
        Ok(Self { grid, cells })
    }

    /// Piece `i` in cell `i`, upright.
    pub fn identity(grid: BlockGeometry, with_orientation: bool) -> Self {
        let orientation = with_orientation.then_some(D4::IDENTITY);
        let cells = (0..grid.n()).map(|piece| Placement { piece, orientation }).collect();
        Self { grid, cells }
    }

    /// Correct assembly of the blocks of an image scrambled with `spec`:
    /// encrypted block `i` belongs in cell `permutation[i]`, turned back by
    /// the inverse of its D4 code.
    pub fn truth_for(spec: &TransformSpec, grid: BlockGeometry, with_orientation: bool) -> Result<Self> {
        spec.validate(grid.n())?;
        let mut cells = vec![
            Placement {
                piece: 0,
                orientation: None
            };
            grid.n()
        ];
        for (i, &dst) in spec.permutation.iter().enumerate() {
            cells[dst] = Placement {
                piece: i,
                orientation: with_orientation.then(|| spec.d4_codes[i].inverse()),
            };
        }
        Self::new(grid, cells)
    }

    pub fn grid(&self) -> &BlockGeometry {
        &self.grid
    }

    pub fn cells(&self) -> &[Placement] {
        &self.cells
    }

    /// Draws the assembly from the pieces it refers to.
    pub fn render(&self, pieces: &[RasterImage]) -> Result<RasterImage> {
        let blocks: Vec<RasterImage> = self
            .cells
            .iter()
            .map(|c| {
                let piece = pieces
                    .get(c.piece)
                    .ok_or_else(|| Error::GeometryMismatch(format!("placement names missing piece {}", c.piece)))?;
                match c.orientation {
                    Some(o) => o.apply(piece),
                    None => Ok(piece.clone()),
                }
            })
            .collect::<Result<_>>()?;
        assemble_blocks(&blocks, &self.grid)
    }

    /// The same assembly with the whole picture transformed by `g`, or
    /// `None` when `g` would change the grid's shape.
    pub fn transformed(&self, g: D4) -> Option<Self> {
        let (rows, cols) = (self.grid.rows, self.grid.cols);
        if g.transposes() && (rows != cols || self.grid.block_w != self.grid.block_h) {
            return None;
        }
        let mut cells = self.cells.clone();
        for (cell, p) in self.cells.iter().enumerate() {
            let (mut r, mut c) = (cell / cols, cell % cols);
            let mut h = rows;
            if g.flipped() {
                c = cols - 1 - c;
            }
            for _ in 0..g.quarter_turns() {
                (r, c) = (c, h - 1 - r);
                h = if h == rows { cols } else { rows };
            }
            cells[r * cols + c] = Placement {
                piece: p.piece,
                orientation: p.orientation.map(|o| g.then_after(o)),
            };
        }
        Some(Self { grid: self.grid, cells })
    }

    /// Of the whole-picture symmetries that keep the grid shape, the one
    /// under which `self` best matches `truth` by `Dc + Nc + Lc`, earliest
    /// D4 code on ties. Assemblies without orientations are returned as is,
    /// since turning their picture would turn every piece with it.
    pub fn aligned_to(&self, truth: &AssemblyResult) -> Result<Self> {
        self.check_same_grid(truth)?;
        if self.cells.iter().any(|c| c.orientation.is_none()) {
            return Ok(self.clone());
        }
        let mut best = (f64::NEG_INFINITY, self.clone());
        for g in D4::ALL {
            let Some(candidate) = self.transformed(g) else {
                continue;
            };
            let score = direct_comparison(&candidate, truth)?
                + neighbor_comparison(&candidate, truth)?
                + largest_component(&candidate, truth)?;
            if score > best.0 {
                best = (score, candidate);
            }
        }
        Ok(best.1)
    }

    fn check_same_grid(&self, truth: &AssemblyResult) -> Result<()> {
        if self.grid.cols != truth.grid.cols || self.grid.rows != truth.grid.rows {
            return Err(Error::GeometryMismatch(format!(
                "assembly grid {}x{} vs truth {}x{}",
                self.grid.cols, self.grid.rows, truth.grid.cols, truth.grid.rows
            )));
        }
        Ok(())
    }

    /// Adjacent cell pairs `(left/top, right/bottom)` whose pieces are
    /// neighbors in the same direction in `truth`, both with agreeing
    /// orientations.
    fn correct_adjacencies(&self, truth: &AssemblyResult) -> Vec<(usize, usize)> {
        let cols = self.grid.cols;
        let mut truth_cell = vec![0usize; self.cells.len()];
        for (cell, p) in truth.cells.iter().enumerate() {
            truth_cell[p.piece] = cell;
        }
        let placed_ok = |cell: usize| {
            let p = &self.cells[cell];
            p.orientation_agrees(&truth.cells[truth_cell[p.piece]])
        };
        let mut out = Vec::new();
        for cell in 0..self.cells.len() {
            let (row, col) = (cell / cols, cell % cols);
            let a = truth_cell[self.cells[cell].piece];
            if col + 1 < cols {
                let b = truth_cell[self.cells[cell + 1].piece];
                if a % cols + 1 < cols && b == a + 1 && placed_ok(cell) && placed_ok(cell + 1) {
                    out.push((cell, cell + 1));
                }
            }
            if row + 1 < self.grid.rows {
                let b = truth_cell[self.cells[cell + cols].piece];
                if b == a + cols && placed_ok(cell) && placed_ok(cell + cols) {
                    out.push((cell, cell + cols));
                }
            }
        }
        out
    }
}

/// Fraction of pieces in their true cell (and true orientation when both
/// assemblies record one).
pub fn direct_comparison(result: &AssemblyResult, truth: &AssemblyResult) -> Result<f64> {
    result.check_same_grid(truth)?;
    let correct = result
        .cells
        .iter()
        .zip(truth.cells.iter())
        .filter(|(r, t)| r.piece == t.piece && r.orientation_agrees(t))
        .count();
    Ok(correct as f64 / result.cells.len() as f64)
}

/// Correct adjacencies over all horizontal and vertical adjacency slots of
/// the grid. A single-cell grid has no slots and scores like
/// [`direct_comparison`].
pub fn neighbor_comparison(result: &AssemblyResult, truth: &AssemblyResult) -> Result<f64> {
    result.check_same_grid(truth)?;
    let g = &result.grid;
    let slots = g.rows * (g.cols - 1) + (g.rows - 1) * g.cols;
    if slots == 0 {
        return direct_comparison(result, truth);
    }
    Ok(result.correct_adjacencies(truth).len() as f64 / slots as f64)
}

/// Size of the largest group of pieces connected through correct
/// adjacencies, over the number of pieces. A lone piece is a group of one.
pub fn largest_component(result: &AssemblyResult, truth: &AssemblyResult) -> Result<f64> {
    result.check_same_grid(truth)?;
    let n = result.cells.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, b) in result.correct_adjacencies(truth) {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let mut sizes = vec![0usize; n];
    for x in 0..n {
        let r = find(&mut parent, x);
        sizes[r] += 1;
    }
    Ok(*sizes.iter().max().expect("non-empty grid") as f64 / n as f64)
}

/// Peak signal-to-noise ratio over all samples of all channels, in dB.
/// Identical images give `f64::INFINITY`.
pub fn psnr(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(Error::GeometryMismatch(format!(
            "PSNR of {}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    let sse: u64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| {
            let d = x.abs_diff(y) as u64;
            d * d
        })
        .sum();
    if sse == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse as f64 / a.samples().len() as f64;
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

/// Assembly scores of one attack.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub dc: f64,
    pub nc: f64,
    pub lc: f64,
    /// PSNR of the rendered assembly against the correct assembly.
    pub psnr_db: f64,
}

impl MetricsReport {
    pub fn compute(result: &AssemblyResult, truth: &AssemblyResult, pieces: &[RasterImage]) -> Result<Self> {
        Ok(Self {
            dc: direct_comparison(result, truth)?,
            nc: neighbor_comparison(result, truth)?,
            lc: largest_component(result, truth)?,
            psnr_db: psnr(&result.render(pieces)?, &truth.render(pieces)?)?,
        })
    }

    /// `Dc + Nc + Lc`, the quantity maximized across trials.
    pub fn score(&self) -> f64 {
        self.dc + self.nc + self.lc
    }
}
