//! The scaled mollifier and coefficient/initial-data smoothing.
//!
//! The kernel is the radial quartic bump `omega(r) ~ (1 - r^2)^2` for
//! `r < 1`, scaled to support radius exactly `delta` and renormalized on the
//! grid so its discrete mass is exactly one. Discrete renormalization (rather
//! than the continuum constant) makes `mollify(constant) = constant` hold to
//! roundoff, which downstream range and equilibrium invariants rely on.

use ndarray::Array2;

use crate::error::Error;
use crate::field::ScalarField2D;
use crate::Result;

/// Rasterized mollification kernel at scale `delta`.
#[derive(Debug, Clone)]
pub struct MollifierKernel {
    delta: f64,
    /// Offset weights, square stencil of half-width `radius_cells`;
    /// weights sum to `1/h^2` so that `sum w * h^2 = 1`.
    weights: Array2<f64>,
    radius_cells: usize,
    /// Grid spacing the kernel was rasterized for.
    h: f64,
}

impl MollifierKernel {
    /// Rasterize the kernel for a grid of spacing `h`.
    ///
    /// Fails with a resolution error when `delta < 2h`: below that the
    /// discrete kernel degenerates towards the identity and smoothing-scale
    /// estimates are meaningless.
    pub fn new(delta: f64, h: f64) -> Result<Self> {
        if !(delta > 0.0) || !(h > 0.0) {
            return Err(Error::argument("delta and h must be positive"));
        }
        if delta < 2.0 * h {
            return Err(Error::Resolution { delta, min_delta: 2.0 * h });
        }
        let radius_cells = (delta / h).ceil() as usize;
        let n = 2 * radius_cells + 1;
        let mut weights = Array2::zeros((n, n));
        let mut mass = 0.0;
        for i in 0..n {
            for j in 0..n {
                let dx = (i as f64 - radius_cells as f64) * h;
                let dy = (j as f64 - radius_cells as f64) * h;
                let r2 = (dx * dx + dy * dy) / (delta * delta);
                if r2 < 1.0 {
                    let w = (1.0 - r2) * (1.0 - r2);
                    weights[(i, j)] = w;
                    mass += w;
                }
            }
        }
        // normalize so that sum(weights) * h^2 == 1
        let scale = 1.0 / (mass * h * h);
        weights.mapv_inplace(|w| w * scale);
        Ok(MollifierKernel { delta, weights, radius_cells, h })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Discrete mass `sum w * h^2`; equals one up to roundoff.
    pub fn discrete_mass(&self) -> f64 {
        self.weights.sum() * self.h * self.h
    }
}

/// Discrete convolution `field * kernel` with constant extension of the
/// field outside the domain (clamped indices); this matches the far-field
/// state used by the solver.
///
/// The kernel is nonnegative with unit mass, so the output is pointwise a
/// convex combination of input values: the range can only contract.
pub fn mollify(field: &ScalarField2D, kernel: &MollifierKernel) -> Result<ScalarField2D> {
    let grid = field.grid;
    if (kernel.h - grid.h).abs() > 1e-12 * grid.h {
        return Err(Error::argument(format!(
            "kernel rasterized for h = {} but field has h = {}",
            kernel.h, grid.h
        )));
    }
    let r = kernel.radius_cells as isize;
    let (nx, ny) = (grid.nx as isize, grid.ny as isize);
    let h2 = grid.cell_area();
    let mut out = Array2::zeros((grid.nx, grid.ny));
    for ix in 0..nx {
        for iy in 0..ny {
            let mut acc = 0.0;
            for di in -r..=r {
                let sx = (ix + di).clamp(0, nx - 1) as usize;
                for dj in -r..=r {
                    let sy = (iy + dj).clamp(0, ny - 1) as usize;
                    let w = kernel.weights[((di + r) as usize, (dj + r) as usize)];
                    acc += w * field.values[(sx, sy)];
                }
            }
            out[(ix as usize, iy as usize)] = acc * h2;
        }
    }
    ScalarField2D::new(grid, out)
}

/// Cut off and mollify initial data: values are reset to the far-field
/// state `a` outside the centered square of half-width `1/delta` (clamped to
/// the domain), then convolved with the kernel. The result stays in `[a, b]`.
pub fn prepare_initial_data(
    u0: &ScalarField2D,
    kernel: &MollifierKernel,
    bounds: (f64, f64),
) -> Result<ScalarField2D> {
    let (a, b) = bounds;
    let (lo, hi) = (u0.min(), u0.max());
    if lo < a - 1e-12 || hi > b + 1e-12 {
        return Err(Error::argument(format!(
            "initial data range [{lo}, {hi}] exceeds state bounds [{a}, {b}]"
        )));
    }
    let grid = u0.grid;
    let cx = 0.5 * (grid.x_min + grid.x_max);
    let cy = 0.5 * (grid.y_min + grid.y_max);
    let half_width = 1.0 / kernel.delta();
    let mut cut = u0.clone();
    for ix in 0..grid.nx {
        for iy in 0..grid.ny {
            let (x, y) = grid.cell_center(ix, iy);
            if (x - cx).abs() > half_width || (y - cy).abs() > half_width {
                cut.values[(ix, iy)] = a;
            }
        }
    }
    mollify(&cut, kernel)
}

/// Discrete Laplacian `L1` norm, `sum |5-point Laplacian| * h^2`, with
/// constant extension at the frame (matching the convolution's boundary
/// treatment).
pub fn laplacian_l1_norm(field: &ScalarField2D) -> f64 {
    let grid = field.grid;
    let (nx, ny) = (grid.nx as isize, grid.ny as isize);
    let v = &field.values;
    let at = |ix: isize, iy: isize| -> f64 {
        v[(ix.clamp(0, nx - 1) as usize, iy.clamp(0, ny - 1) as usize)]
    };
    let mut acc = 0.0;
    for ix in 0..nx {
        for iy in 0..ny {
            let lap = at(ix + 1, iy) + at(ix - 1, iy) + at(ix, iy + 1) + at(ix, iy - 1)
                - 4.0 * at(ix, iy);
            acc += lap.abs();
        }
    }
    // the 5-point Laplacian carries 1/h^2, the L1 sum carries h^2
    acc
}
