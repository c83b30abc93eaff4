//! Uniform cell-centered grids, gridded scalar fields, piecewise-constant
//! coefficient descriptions, and the discrete total variation.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Uniform rectangular grid with square cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    /// Uniform spacing, `h = (x_max - x_min)/nx = (y_max - y_min)/ny`.
    pub h: f64,
}

impl Grid2D {
    /// Build a grid; the aspect ratio must produce square cells.
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx < 8 || ny < 8 {
            return Err(Error::config("grid must have at least 8 cells per direction"));
        }
        if !(x_max > x_min && y_max > y_min) {
            return Err(Error::config("grid extents must be positive"));
        }
        let hx = (x_max - x_min) / nx as f64;
        let hy = (y_max - y_min) / ny as f64;
        if (hx - hy).abs() > 1e-12 * hx.max(hy) {
            return Err(Error::config(format!("cells must be square: hx = {hx}, hy = {hy}")));
        }
        Ok(Grid2D { x_min, x_max, y_min, y_max, nx, ny, h: hx })
    }

    /// Square grid over [0, extent]^2.
    pub fn square(extent: f64, n: usize) -> Result<Self> {
        Grid2D::new(0.0, extent, 0.0, extent, n, n)
    }

    /// Center of cell `(ix, iy)`.
    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.x_min + (ix as f64 + 0.5) * self.h,
            self.y_min + (iy as f64 + 0.5) * self.h,
        )
    }

    /// Cell area `h^2`.
    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    pub fn extent_x(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn extent_y(&self) -> f64 {
        self.y_max - self.y_min
    }

    fn same_as(&self, other: &Grid2D) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && (self.x_min - other.x_min).abs() < 1e-12
            && (self.x_max - other.x_max).abs() < 1e-12
            && (self.y_min - other.y_min).abs() < 1e-12
            && (self.y_max - other.y_max).abs() < 1e-12
    }
}

/// A real-valued field sampled at cell centers; indexed `[ix, iy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    pub grid: Grid2D,
    pub values: Array2<f64>,
}

impl ScalarField2D {
    pub fn new(grid: Grid2D, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.nx, grid.ny) {
            return Err(Error::argument(format!(
                "field shape {:?} does not match grid ({}, {})",
                values.dim(),
                grid.nx,
                grid.ny
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::argument("field contains non-finite values"));
        }
        Ok(ScalarField2D { grid, values })
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        let values = Array2::from_elem((grid.nx, grid.ny), value);
        ScalarField2D { grid, values }
    }

    /// Evaluate `func` at every cell center.
    pub fn from_fn(grid: Grid2D, mut func: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Array2::zeros((grid.nx, grid.ny));
        for ix in 0..grid.nx {
            for iy in 0..grid.ny {
                let (x, y) = grid.cell_center(ix, iy);
                values[(ix, iy)] = func(x, y);
            }
        }
        ScalarField2D { grid, values }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// `sum(values) * h^2`.
    pub fn mass(&self) -> f64 {
        self.values.sum() * self.grid.cell_area()
    }

    /// Discrete `L1` norm: `sum |values| * h^2`.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_area()
    }

    /// Discrete `L2` norm: `sqrt(sum values^2 * h^2)`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    pub(crate) fn assert_same_grid(&self, other: &ScalarField2D, what: &str) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::argument(format!("{what}: grids do not match")));
        }
        Ok(())
    }

    /// Write the snapshot format: one header line
    /// `nx,ny,x_min,x_max,y_min,y_max`, then `ny` rows (fixed `y`, ascending),
    /// each with `nx` comma-separated values in ascending `x`.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let g = &self.grid;
        writeln!(out, "{},{},{},{},{},{}", g.nx, g.ny, g.x_min, g.x_max, g.y_min, g.y_max)
            .expect("write to string");
        for iy in 0..g.ny {
            let mut row = String::with_capacity(g.nx * 24);
            for ix in 0..g.nx {
                if ix > 0 {
                    row.push(',');
                }
                write!(row, "{}", self.values[(ix, iy)]).expect("write to string");
            }
            out.push_str(&row);
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Read a snapshot written by [`ScalarField2D::write_snapshot`].
    pub fn read_snapshot(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::parse("empty snapshot file"))?;
        let head: Vec<&str> = header.split(',').collect();
        if head.len() != 6 {
            return Err(Error::parse("snapshot header must have 6 fields"));
        }
        let nx: usize = head[0].parse().map_err(|e| Error::parse(format!("bad nx: {e}")))?;
        let ny: usize = head[1].parse().map_err(|e| Error::parse(format!("bad ny: {e}")))?;
        let nums: Vec<f64> = head[2..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::parse(format!("bad bound: {e}"))))
            .collect::<Result<_>>()?;
        let grid = Grid2D::new(nums[0], nums[1], nums[2], nums[3], nx, ny)?;
        let mut values = Array2::zeros((nx, ny));
        for iy in 0..ny {
            let line = lines
                .next()
                .ok_or_else(|| Error::parse(format!("snapshot truncated at row {iy}")))?;
            let mut count = 0;
            for (ix, tok) in line.split(',').enumerate() {
                if ix >= nx {
                    return Err(Error::parse(format!("row {iy} has more than {nx} values")));
                }
                values[(ix, iy)] =
                    tok.trim().parse().map_err(|e| Error::parse(format!("bad value: {e}")))?;
                count += 1;
            }
            if count != nx {
                return Err(Error::parse(format!("row {iy} has {count} values, expected {nx}")));
            }
        }
        ScalarField2D::new(grid, values)
    }
}

/// Discrete anisotropic total variation:
/// `sum |u(i+1,j) - u(i,j)| h + sum |u(i,j+1) - u(i,j)| h`.
///
/// Zero iff the field is constant; a seminorm in the field values.
pub fn total_variation(field: &ScalarField2D) -> f64 {
    let (nx, ny) = field.values.dim();
    let v = &field.values;
    let mut tv = 0.0;
    for ix in 0..nx.saturating_sub(1) {
        for iy in 0..ny {
            tv += (v[(ix + 1, iy)] - v[(ix, iy)]).abs();
        }
    }
    for ix in 0..nx {
        for iy in 0..ny.saturating_sub(1) {
            tv += (v[(ix, iy + 1)] - v[(ix, iy)]).abs();
        }
    }
    tv * field.grid.h
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// A rectangle carrying a field value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub value: f64,
}

impl Block {
    pub fn rect(&self) -> Rect {
        Rect { x0: self.x0, x1: self.x1, y0: self.y0, y1: self.y1 }
    }
}

/// Piecewise-constant field: a background value overridden by rectangular
/// blocks. When blocks overlap, the later block in the list wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseConstantCoeff {
    pub background: f64,
    #[serde(default)]
    pub blocks: Vec<Block>,
}

impl PiecewiseConstantCoeff {
    pub fn constant(value: f64) -> Self {
        PiecewiseConstantCoeff { background: value, blocks: Vec::new() }
    }

    /// Point evaluation with the last-block-wins rule.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut value = self.background;
        for block in &self.blocks {
            if block.rect().contains(x, y) {
                value = block.value;
            }
        }
        value
    }

    /// Smallest and largest value the description can take.
    pub fn value_range(&self) -> (f64, f64) {
        let mut lo = self.background;
        let mut hi = self.background;
        for b in &self.blocks {
            lo = lo.min(b.value);
            hi = hi.max(b.value);
        }
        (lo, hi)
    }

    /// Deterministic rasterization: each cell takes the value at its center.
    pub fn rasterize(&self, grid: Grid2D) -> ScalarField2D {
        ScalarField2D::from_fn(grid, |x, y| self.eval(x, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid64() -> Grid2D {
        Grid2D::square(1.0, 64).unwrap()
    }

    #[test]
    fn grid_rejects_non_square_cells() {
        assert!(Grid2D::new(0.0, 1.0, 0.0, 2.0, 32, 32).is_err());
        assert!(Grid2D::new(0.0, 1.0, 0.0, 2.0, 32, 64).is_ok());
    }

    #[test]
    fn grid_rejects_tiny_resolution() {
        assert!(Grid2D::square(1.0, 4).is_err());
    }

    #[test]
    fn rasterize_empty_blocks_is_background() {
        let field = PiecewiseConstantCoeff::constant(1.0).rasterize(grid64());
        assert!(field.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rasterize_left_half_block() {
        let coeff = PiecewiseConstantCoeff {
            background: 1.0,
            blocks: vec![Block { x0: 0.0, x1: 0.5, y0: 0.0, y1: 1.0, value: 2.0 }],
        };
        let field = coeff.rasterize(grid64());
        for ix in 0..64 {
            for iy in 0..64 {
                let expected = if ix < 32 { 2.0 } else { 1.0 };
                assert_eq!(field.values[(ix, iy)], expected, "cell ({ix},{iy})");
            }
        }
    }

    #[test]
    fn rasterize_later_block_wins() {
        let coeff = PiecewiseConstantCoeff {
            background: 0.0,
            blocks: vec![
                Block { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0, value: 1.0 },
                Block { x0: 0.25, x1: 0.75, y0: 0.25, y1: 0.75, value: 3.0 },
            ],
        };
        let field = coeff.rasterize(grid64());
        assert_eq!(field.values[(32, 32)], 3.0);
        assert_eq!(field.values[(2, 2)], 1.0);
    }

    #[test]
    fn tv_of_constant_field_is_zero() {
        let field = ScalarField2D::constant(grid64(), 3.7);
        assert_eq!(total_variation(&field), 0.0);
    }

    #[test]
    fn tv_of_vertical_jump_counts_crossing_edges() {
        // jump of height J across the full domain height L: TV = J * L,
        // exactly, because the block edge is the only contributing column.
        let j = 1.5;
        let coeff = PiecewiseConstantCoeff {
            background: 0.5,
            blocks: vec![Block { x0: 0.0, x1: 0.5, y0: 0.0, y1: 1.0, value: 0.5 + j }],
        };
        let field = coeff.rasterize(grid64());
        let tv = total_variation(&field);
        assert!((tv - j * 1.0).abs() < 1e-12, "tv = {tv}");
    }

    #[test]
    fn tv_is_a_seminorm_on_random_fields() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let grid = Grid2D::square(1.0, 16).unwrap();
        for _ in 0..20 {
            let a = ScalarField2D::from_fn(grid, |_, _| rng.gen_range(-1.0..1.0));
            let b = ScalarField2D::from_fn(grid, |_, _| rng.gen_range(-1.0..1.0));
            let (ca, cb) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let combo = ScalarField2D::new(grid, ca * &a.values + cb * &b.values).unwrap();
            let lhs = total_variation(&combo);
            let rhs = ca.abs() * total_variation(&a) + cb.abs() * total_variation(&b);
            assert!(lhs <= rhs + 1e-10, "{lhs} > {rhs}");
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        let field = ScalarField2D::from_fn(grid64(), |x, y| (x * 7.3).sin() * (y - 0.5));
        field.write_snapshot(&path).unwrap();
        let back = ScalarField2D::read_snapshot(&path).unwrap();
        assert_eq!(field.grid, back.grid);
        // values serialize with shortest round-trip formatting, so bit-exact
        assert_eq!(field.values, back.values);
    }

    #[test]
    fn snapshot_rejects_malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "8,8,0,1,0,1\n1,2,3\n").unwrap();
        assert!(ScalarField2D::read_snapshot(&path).is_err());
    }

    #[test]
    fn field_shape_must_match_grid() {
        let values = Array2::zeros((4, 4));
        assert!(ScalarField2D::new(grid64(), values).is_err());
    }
}
