//! Explicit monotone finite-difference solver for the uniformly parabolic
//! regularization
//!
//! ```text
//! u_t + f(k_delta, u)_x + g(l_delta, u)_y = epsilon * (u_xx + u_yy).
//! ```
//!
//! Space: local Lax-Friedrichs convective fluxes with the interface
//! coefficient taken as the arithmetic mean of the adjacent mollified
//! coefficient cells, plus the explicit 5-point Laplacian. Time: forward
//! Euler. The face dissipation coefficient bounds `|f_u|` over the whole
//! state box for the face coefficient, so the update is monotone whenever
//! `dt * (lambda_x + lambda_y) / h + 4 epsilon dt / h^2 <= 1`; with
//! `cfl_safety <= 0.5` the stable step bound below implies that sum is at
//! most `~1`, and the state box `[a, b]` is then preserved exactly up to
//! roundoff.
//!
//! The domain truncates the plane: a frame of ghost cells holds the
//! far-field state `u = a`. Runs are valid while the numerical support
//! keeps a margin of at least `4 delta` from the frame; the margin is
//! monitored and violations flag the run.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::field::{total_variation, Grid2D, ScalarField2D};
use crate::flux::FluxModel;
use crate::monitor::{MonitorSample, MonitorSeries};
use crate::Result;

/// Support-margin threshold in units of `delta`.
pub const SUPPORT_MARGIN_FACTOR: f64 = 4.0;

/// Threshold above the far-field state that defines the numerical support.
pub const SUPPORT_THRESHOLD: f64 = 1e-6;

/// Configuration of one `(epsilon, delta)` solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Balance constant tying the two smoothing scales: `delta = balance_c * epsilon`.
    pub balance_c: f64,
    pub t_end: f64,
    /// Fraction of the stable step bound actually taken. Values at or below
    /// 0.5 make the scheme provably monotone; the shipped scenarios use 0.45.
    pub cfl_safety: f64,
    /// Sorted sampling times in `[0, t_end]`.
    pub output_times: Vec<f64>,
    /// Record the total variation of the singular mapping at sample times.
    #[serde(default)]
    pub record_psi_tv: bool,
}

impl SolverConfig {
    pub fn validate(&self, h: f64) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::config("epsilon must be positive"));
        }
        if !(self.balance_c > 0.0) {
            return Err(Error::config("balance_c must be positive"));
        }
        if (self.delta - self.balance_c * self.epsilon).abs() > 1e-12 {
            return Err(Error::config(format!(
                "balance violated: delta = {} but balance_c * epsilon = {}",
                self.delta,
                self.balance_c * self.epsilon
            )));
        }
        if self.delta < 2.0 * h {
            return Err(Error::Resolution { delta: self.delta, min_delta: 2.0 * h });
        }
        if !(self.t_end > 0.0) {
            return Err(Error::config("t_end must be positive"));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::config("cfl_safety must lie in (0, 1]"));
        }
        let mut prev = -f64::EPSILON;
        for &t in &self.output_times {
            if t < 0.0 || t > self.t_end + 1e-12 {
                return Err(Error::config(format!("output time {t} outside [0, t_end]")));
            }
            if t <= prev {
                return Err(Error::config("output times must be strictly increasing"));
            }
            prev = t;
        }
        Ok(())
    }
}

/// Stable step bound
/// `dt = cfl_safety * min(h / (max|f_u| + max|g_u|), h^2 / (4 epsilon))`.
///
/// Either limit may be absent (`epsilon = 0` or zero wave speeds); both
/// absent is a configuration error.
pub fn stable_timestep_formula(
    h: f64,
    max_fu: f64,
    max_gu: f64,
    epsilon: f64,
    cfl_safety: f64,
) -> Result<f64> {
    let speed = max_fu + max_gu;
    let convective = if speed > 0.0 { h / speed } else { f64::INFINITY };
    let diffusive = if epsilon > 0.0 { h * h / (4.0 * epsilon) } else { f64::INFINITY };
    let dt = cfl_safety * convective.min(diffusive);
    if !dt.is_finite() {
        return Err(Error::config("degenerate step bound: no convective or diffusive limit"));
    }
    Ok(dt)
}

/// Number of coefficient samples for the face wave-speed table.
const LAMBDA_K_SAMPLES: usize = 129;
/// Number of state samples per coefficient when bounding `|f_u|`.
const LAMBDA_U_SAMPLES: usize = 1025;
/// Face dissipation inflation over the sampled bound; keeps the sampled
/// maxima a true upper bound for smooth flux derivatives.
const LAMBDA_INFLATION: f64 = 1e-3;

/// Sampled wave-speed table over one coefficient range.
struct SpeedTable {
    lo: f64,
    hi: f64,
    values: Vec<f64>,
    max: f64,
}

impl SpeedTable {
    fn build(lo: f64, hi: f64, mut speed_at: impl FnMut(f64) -> f64) -> Self {
        let n = if hi > lo { LAMBDA_K_SAMPLES } else { 1 };
        let mut values = Vec::with_capacity(n);
        let mut max: f64 = 0.0;
        for i in 0..n {
            let c = if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
            let v = speed_at(c);
            values.push(v);
            max = max.max(v);
        }
        SpeedTable { lo, hi, values, max }
    }

    /// Conservative face bound: bracket the coefficient and inflate.
    fn face_lambda(&self, c: f64) -> f64 {
        if self.values.len() == 1 {
            return self.values[0] * (1.0 + LAMBDA_INFLATION);
        }
        let pos = (c - self.lo) / (self.hi - self.lo) * (self.values.len() - 1) as f64;
        let i0 = (pos.floor().max(0.0) as usize).min(self.values.len() - 1);
        let i1 = (i0 + 1).min(self.values.len() - 1);
        self.values[i0].max(self.values[i1]) * (1.0 + LAMBDA_INFLATION)
    }
}

/// One viscous solve with its attached monitors.
///
/// A run is advanced by one logical thread of control; distinct runs are
/// independent.
pub struct SolverRun {
    config: SolverConfig,
    model: FluxModel,
    k_delta: ScalarField2D,
    l_delta: ScalarField2D,
    u: ScalarField2D,
    t: f64,
    step_count: u64,
    monitors: MonitorSeries,
    /// Accumulated mass flow through the frame (convective + diffusive).
    boundary_flux_budget: f64,
    flagged: Option<String>,
    next_output: usize,

    // precomputed face data
    face_k: Array2<f64>,
    face_l: Array2<f64>,
    lambda_x: Array2<f64>,
    lambda_y: Array2<f64>,
    max_fu: f64,
    max_gu: f64,

    // scratch buffers
    flux_x: Array2<f64>,
    flux_y: Array2<f64>,
    u_next: Array2<f64>,
    prev_u: Array2<f64>,
    last_dt: f64,
}

impl SolverRun {
    /// Assemble a run from mollified coefficients and prepared initial data.
    /// All fields must share one grid; the initial state must lie in `[a, b]`.
    pub fn new(
        model: FluxModel,
        config: SolverConfig,
        k_delta: ScalarField2D,
        l_delta: ScalarField2D,
        u0: ScalarField2D,
    ) -> Result<Self> {
        let grid = u0.grid;
        config.validate(grid.h)?;
        u0.assert_same_grid(&k_delta, "initial data vs k_delta")?;
        u0.assert_same_grid(&l_delta, "initial data vs l_delta")?;
        let (a, b) = model.state_bounds();
        if u0.min() < a - 1e-12 || u0.max() > b + 1e-12 {
            return Err(Error::argument(format!(
                "initial state range [{}, {}] outside [{a}, {b}]",
                u0.min(),
                u0.max()
            )));
        }

        let (nx, ny) = (grid.nx, grid.ny);
        let kv = &k_delta.values;
        let lv = &l_delta.values;

        // interface coefficients: arithmetic mean of adjacent cells, edge
        // faces take the edge cell value (constant coefficient extension)
        let mut face_k = Array2::zeros((nx + 1, ny));
        for iy in 0..ny {
            face_k[(0, iy)] = kv[(0, iy)];
            face_k[(nx, iy)] = kv[(nx - 1, iy)];
            for ix in 1..nx {
                face_k[(ix, iy)] = 0.5 * (kv[(ix - 1, iy)] + kv[(ix, iy)]);
            }
        }
        let mut face_l = Array2::zeros((nx, ny + 1));
        for ix in 0..nx {
            face_l[(ix, 0)] = lv[(ix, 0)];
            face_l[(ix, ny)] = lv[(ix, ny - 1)];
            for iy in 1..ny {
                face_l[(ix, iy)] = 0.5 * (lv[(ix, iy - 1)] + lv[(ix, iy)]);
            }
        }

        let table_x = SpeedTable::build(k_delta.min(), k_delta.max(), |k| {
            model.max_abs_f_u(k, k, 1, LAMBDA_U_SAMPLES)
        });
        let table_y = SpeedTable::build(l_delta.min(), l_delta.max(), |l| {
            model.max_abs_g_u(l, l, 1, LAMBDA_U_SAMPLES)
        });
        let lambda_x = Array2::from_shape_fn((nx + 1, ny), |(i, j)| {
            table_x.face_lambda(face_k[(i, j)])
        });
        let lambda_y = Array2::from_shape_fn((nx, ny + 1), |(i, j)| {
            table_y.face_lambda(face_l[(i, j)])
        });

        let record_initial = config.output_times.first().is_some_and(|&t| t == 0.0);
        let mut run = SolverRun {
            config,
            model,
            k_delta,
            l_delta,
            prev_u: u0.values.clone(),
            u_next: u0.values.clone(),
            u: u0,
            t: 0.0,
            step_count: 0,
            monitors: MonitorSeries::default(),
            boundary_flux_budget: 0.0,
            flagged: None,
            next_output: 0,
            face_k,
            face_l,
            lambda_x,
            lambda_y,
            max_fu: table_x.max,
            max_gu: table_y.max,
            flux_x: Array2::zeros((nx + 1, ny)),
            flux_y: Array2::zeros((nx, ny + 1)),
            last_dt: 0.0,
        };
        if record_initial {
            run.record_initial_sample();
            run.next_output = 1;
        }
        Ok(run)
    }

    pub fn grid(&self) -> Grid2D {
        self.u.grid
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &ScalarField2D {
        &self.u
    }

    pub fn model(&self) -> &FluxModel {
        &self.model
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn monitors(&self) -> &MonitorSeries {
        &self.monitors
    }

    pub fn k_delta(&self) -> &ScalarField2D {
        &self.k_delta
    }

    pub fn l_delta(&self) -> &ScalarField2D {
        &self.l_delta
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Accumulated mass flow through the frame since t = 0.
    pub fn boundary_flux_budget(&self) -> f64 {
        self.boundary_flux_budget
    }

    /// Reason the run was flagged (support margin violation), if any.
    pub fn flag(&self) -> Option<&str> {
        self.flagged.as_deref()
    }

    /// Stable step bound for this run; wave-speed maxima are taken over the
    /// state box and the realized coefficient ranges.
    pub fn stable_timestep(&self) -> Result<f64> {
        stable_timestep_formula(
            self.grid().h,
            self.max_fu,
            self.max_gu,
            self.config.epsilon,
            self.config.cfl_safety,
        )
    }

    /// Advance one forward-Euler step of size `dt`.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let max_dt = self.stable_timestep()?;
        if dt > max_dt * (1.0 + 1e-9) {
            return Err(Error::CflViolation { dt, max_dt });
        }
        if !(dt > 0.0) {
            return Err(Error::argument("dt must be positive"));
        }
        let grid = self.u.grid;
        let (nx, ny) = (grid.nx, grid.ny);
        let h = grid.h;
        let eps = self.config.epsilon;
        let a = self.model.state_bounds().0;

        self.compute_fluxes();

        // conservative update + explicit Laplacian with ghost state a
        let u = &self.u.values;
        let fx = &self.flux_x;
        let fy = &self.flux_y;
        let lam_conv = dt / h;
        let lam_diff = eps * dt / (h * h);
        let mut diff_budget = 0.0;
        for ix in 0..nx {
            for iy in 0..ny {
                let c = u[(ix, iy)];
                let w = if ix > 0 { u[(ix - 1, iy)] } else { a };
                let e = if ix + 1 < nx { u[(ix + 1, iy)] } else { a };
                let s = if iy > 0 { u[(ix, iy - 1)] } else { a };
                let n = if iy + 1 < ny { u[(ix, iy + 1)] } else { a };
                if ix == 0 {
                    diff_budget += a - c;
                }
                if ix + 1 == nx {
                    diff_budget += a - c;
                }
                if iy == 0 {
                    diff_budget += a - c;
                }
                if iy + 1 == ny {
                    diff_budget += a - c;
                }
                self.u_next[(ix, iy)] = c
                    - lam_conv * (fx[(ix + 1, iy)] - fx[(ix, iy)])
                    - lam_conv * (fy[(ix, iy + 1)] - fy[(ix, iy)])
                    + lam_diff * (w + e + s + n - 4.0 * c);
            }
        }

        // mass bookkeeping: inflow through the frame
        let mut conv_budget = 0.0;
        for iy in 0..ny {
            conv_budget += fx[(0, iy)] - fx[(nx, iy)];
        }
        for ix in 0..nx {
            conv_budget += fy[(ix, 0)] - fy[(ix, ny)];
        }
        self.boundary_flux_budget += dt * h * conv_budget + eps * dt * diff_budget;

        // commit: u takes the new state, prev_u the old one; the stale
        // buffer left in u_next is fully overwritten next step
        std::mem::swap(&mut self.prev_u, &mut self.u.values);
        std::mem::swap(&mut self.u.values, &mut self.u_next);
        self.t += dt;
        self.last_dt = dt;
        self.step_count += 1;

        for ((ix, iy), v) in self.u.values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::Divergence { t: self.t, step: self.step_count, ix, iy });
            }
        }
        Ok(())
    }

    /// Advance to `t_target`, sampling monitors at every configured output
    /// time on the way. Within each sampling interval the step size is
    /// uniform (`interval / ceil(interval / dt_stable)`), and the run lands
    /// exactly on each target.
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        if t_target < self.t - 1e-12 {
            return Err(Error::argument(format!(
                "t_target = {t_target} is before current time {}",
                self.t
            )));
        }
        loop {
            let next_out = self.config.output_times.get(self.next_output).copied();
            match next_out {
                Some(tau) if tau <= t_target + 1e-15 => {
                    self.advance_interval(tau)?;
                    self.record_step_sample();
                    self.next_output += 1;
                }
                _ => break,
            }
        }
        self.advance_interval(t_target)
    }

    fn advance_interval(&mut self, target: f64) -> Result<()> {
        let interval = target - self.t;
        if interval <= 1e-15 {
            if interval.abs() < 1e-12 {
                self.t = target;
            }
            return Ok(());
        }
        let dt_stable = self.stable_timestep()?;
        let n = (interval / dt_stable - 1e-12).ceil().max(1.0) as u64;
        let dt = interval / n as f64;
        let start = self.t;
        for i in 0..n {
            self.step(dt)?;
            // keep time exact against accumulation drift
            self.t = start + interval * (i + 1) as f64 / n as f64;
        }
        self.t = target;
        Ok(())
    }

    /// Compute one monitor entry from the state one step back.
    /// `prev_state` must be the state exactly one committed step earlier.
    pub fn sample_monitors(&mut self, prev_state: &Array2<f64>, dt_used: f64) -> MonitorSample {
        let grid = self.u.grid;
        let h2 = grid.cell_area();
        let diff_l1: f64 =
            self.u.values.iter().zip(prev_state.iter()).map(|(a, b)| (a - b).abs()).sum();
        let sample = self.instantaneous_sample(diff_l1 * h2 / dt_used);
        self.monitors.push(sample);
        sample
    }

    fn record_step_sample(&mut self) {
        let grid = self.u.grid;
        let h2 = grid.cell_area();
        let diff_l1: f64 =
            self.u.values.iter().zip(self.prev_u.iter()).map(|(a, b)| (a - b).abs()).sum();
        let sample = self.instantaneous_sample(diff_l1 * h2 / self.last_dt);
        self.monitors.push(sample);
    }

    /// The t = 0 row: the time-derivative entry is the forward quotient of
    /// the first step, which for forward Euler equals `sum |rhs| h^2` of the
    /// initial state.
    fn record_initial_sample(&mut self) {
        let l1td = self.rhs_l1_norm();
        let sample = self.instantaneous_sample(l1td);
        self.monitors.push(sample);
    }

    fn instantaneous_sample(&mut self, l1_time_derivative: f64) -> MonitorSample {
        let grid = self.u.grid;
        let (nx, ny) = (grid.nx, grid.ny);
        let u = &self.u.values;
        let (a, _) = self.model.state_bounds();

        let u_min = self.u.min();
        let u_max = self.u.max();
        let linf = u_min.abs().max(u_max.abs());

        // entropy dissipation: forward differences over interior face pairs
        let mut grad2 = 0.0;
        for ix in 0..nx - 1 {
            for iy in 0..ny {
                let d = u[(ix + 1, iy)] - u[(ix, iy)];
                grad2 += d * d;
            }
        }
        for ix in 0..nx {
            for iy in 0..ny - 1 {
                let d = u[(ix, iy + 1)] - u[(ix, iy)];
                grad2 += d * d;
            }
        }
        let entropy_dissipation = self.config.epsilon * grad2;

        // support margin
        let threshold = a + SUPPORT_THRESHOLD;
        let mut margin = 0.5 * grid.extent_x().min(grid.extent_y());
        for ix in 0..nx {
            for iy in 0..ny {
                if u[(ix, iy)] > threshold {
                    let (x, y) = grid.cell_center(ix, iy);
                    let d = (x - grid.x_min)
                        .min(grid.x_max - x)
                        .min(y - grid.y_min)
                        .min(grid.y_max - y);
                    if d < margin {
                        margin = d;
                    }
                }
            }
        }
        if margin < SUPPORT_MARGIN_FACTOR * self.config.delta && self.flagged.is_none() {
            self.flagged = Some(format!(
                "support margin {margin:.6} fell below {} * delta = {:.6} at t = {:.6}",
                SUPPORT_MARGIN_FACTOR,
                SUPPORT_MARGIN_FACTOR * self.config.delta,
                self.t
            ));
        }

        let psi_tv = if self.config.record_psi_tv {
            let mut psi = Array2::zeros((nx, ny));
            for ix in 0..nx {
                for iy in 0..ny {
                    psi[(ix, iy)] = self
                        .model
                        .singular_mapping_psi(self.k_delta.values[(ix, iy)], u[(ix, iy)])
                        .unwrap_or(f64::NAN);
                }
            }
            Some(total_variation(&ScalarField2D { grid, values: psi }))
        } else {
            None
        };

        MonitorSample {
            t: self.t,
            u_min,
            u_max,
            linf,
            l1_time_derivative,
            entropy_dissipation,
            support_margin: margin,
            psi_tv,
        }
    }

    /// `sum |rhs(u)| h^2` for the current state; for forward Euler this is
    /// exactly the `L1` quotient of the next step regardless of `dt`.
    fn rhs_l1_norm(&mut self) -> f64 {
        self.compute_fluxes();
        let grid = self.u.grid;
        let (nx, ny) = (grid.nx, grid.ny);
        let h = grid.h;
        let eps = self.config.epsilon;
        let a = self.model.state_bounds().0;
        let u = &self.u.values;
        let fx = &self.flux_x;
        let fy = &self.flux_y;
        let mut acc = 0.0;
        for ix in 0..nx {
            for iy in 0..ny {
                let c = u[(ix, iy)];
                let w = if ix > 0 { u[(ix - 1, iy)] } else { a };
                let e = if ix + 1 < nx { u[(ix + 1, iy)] } else { a };
                let s = if iy > 0 { u[(ix, iy - 1)] } else { a };
                let n = if iy + 1 < ny { u[(ix, iy + 1)] } else { a };
                let rhs = -(fx[(ix + 1, iy)] - fx[(ix, iy)]) / h
                    - (fy[(ix, iy + 1)] - fy[(ix, iy)]) / h
                    + eps * (w + e + s + n - 4.0 * c) / (h * h);
                acc += rhs.abs();
            }
        }
        acc * grid.cell_area()
    }

    /// Local Lax-Friedrichs fluxes on all faces, ghost state `a` outside.
    fn compute_fluxes(&mut self) {
        let grid = self.u.grid;
        let (nx, ny) = (grid.nx, grid.ny);
        let a = self.model.state_bounds().0;
        let u = &self.u.values;
        for iy in 0..ny {
            for ix in 0..=nx {
                let ul = if ix > 0 { u[(ix - 1, iy)] } else { a };
                let ur = if ix < nx { u[(ix, iy)] } else { a };
                let k = self.face_k[(ix, iy)];
                let lam = self.lambda_x[(ix, iy)];
                self.flux_x[(ix, iy)] =
                    0.5 * (self.model.f(k, ul) + self.model.f(k, ur)) - 0.5 * lam * (ur - ul);
            }
        }
        for ix in 0..nx {
            for iy in 0..=ny {
                let ul = if iy > 0 { u[(ix, iy - 1)] } else { a };
                let ur = if iy < ny { u[(ix, iy)] } else { a };
                let l = self.face_l[(ix, iy)];
                let lam = self.lambda_y[(ix, iy)];
                self.flux_y[(ix, iy)] =
                    0.5 * (self.model.g(l, ul) + self.model.g(l, ur)) - 0.5 * lam * (ur - ul);
            }
        }
    }
}
