//! Flux pairs `f(k, u)`, `g(l, u)` with analytic derivatives, the derived
//! entropy-flux triple, the singular mapping, and the structural checkers.
//!
//! The entropy fluxes are defined through their `u`-derivatives,
//!
//! ```text
//! F_u = (f_u)^2,   G_u = (g_u)^2,   H_u = f_u * g_u,
//! ```
//!
//! normalized to vanish at `u = a` (only differences and derivatives of
//! `F, G, H` enter the compactness machinery, so the additive constant is
//! immaterial). They are never stored; each call integrates the derivative
//! with a fixed 64-point Gauss-Legendre rule, which is exact for the
//! polynomial integrands of every built-in family.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::quadrature::{gauss64, GaussLegendre};
use crate::Result;

/// A scalar function of (coefficient, state).
pub type FluxFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Flux pair with analytic derivatives and its admissible boxes.
///
/// Immutable after construction; safe to share across threads.
#[derive(Clone)]
pub struct FluxModel {
    name: String,
    f: FluxFn,
    g: FluxFn,
    f_u: FluxFn,
    g_u: FluxFn,
    f_k: FluxFn,
    g_l: FluxFn,
    /// State box [a, b].
    state_bounds: (f64, f64),
    /// Coefficient box [alpha, beta].
    coeff_bounds: (f64, f64),
}

impl fmt::Debug for FluxModel {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("FluxModel")
            .field("name", &self.name)
            .field("state_bounds", &self.state_bounds)
            .field("coeff_bounds", &self.coeff_bounds)
            .finish()
    }
}

/// Result of the invariant-region check (report-only; never an error).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantRegionReport {
    pub pass: bool,
    /// Largest |f| or |g| found at the state endpoints.
    pub max_violation: f64,
}

/// Result of the sampling-based genuine-nonlinearity check.
///
/// The check is a heuristic detector of measure-zero zero sets of the symbol
/// `s(xi, k, l, u) = xi_1 f_u(k, u) + xi_2 g_u(l, u)`: on a grid of unit
/// directions and coefficient pairs it measures the fraction of `u` samples
/// with `|s| <= zero_tol`. A genuinely nonlinear pair keeps that fraction
/// near zero for every direction; aligned (or linear) pairs hit fraction one
/// for the direction orthogonal to `(f_u, g_u)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonlinearityReport {
    pub pass: bool,
    /// Worst zero fraction over all sampled (xi, k, l).
    pub worst_zero_fraction: f64,
    /// Direction realizing the worst fraction.
    pub worst_xi: (f64, f64),
    /// Coefficient pair realizing the worst fraction.
    pub worst_kl: (f64, f64),
    /// Threshold the fraction was compared against (2/n_u plus slack).
    pub threshold: f64,
}

/// Finite-difference consistency of the supplied analytic derivatives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivativeConsistencyReport {
    pub pass: bool,
    pub max_error_f_u: f64,
    pub max_error_g_u: f64,
    pub max_error_f_k: f64,
    pub max_error_g_l: f64,
}

/// Declared slack added to the nonlinearity pass threshold; the sampled
/// fraction can exceed 2/n_u slightly near simple zeros of the symbol.
pub const NONLINEARITY_SLACK: f64 = 0.05;

/// Below this distance from `a` the entropy-flux integrals return 0.
const DEGENERATE_INTERVAL: f64 = 1e-8;

impl FluxModel {
    /// Assemble a model from analytic pieces.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        f: FluxFn,
        g: FluxFn,
        f_u: FluxFn,
        g_u: FluxFn,
        f_k: FluxFn,
        g_l: FluxFn,
        state_bounds: (f64, f64),
        coeff_bounds: (f64, f64),
    ) -> Result<Self> {
        if !(state_bounds.0 < state_bounds.1) {
            return Err(Error::argument("state bounds must satisfy a < b"));
        }
        if !(coeff_bounds.0 <= coeff_bounds.1) {
            return Err(Error::argument("coefficient bounds must satisfy alpha <= beta"));
        }
        Ok(FluxModel { name: name.into(), f, g, f_u, g_u, f_k, g_l, state_bounds, coeff_bounds })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_bounds(&self) -> (f64, f64) {
        self.state_bounds
    }

    pub fn coeff_bounds(&self) -> (f64, f64) {
        self.coeff_bounds
    }

    pub fn f(&self, k: f64, u: f64) -> f64 {
        (self.f)(k, u)
    }

    pub fn g(&self, l: f64, u: f64) -> f64 {
        (self.g)(l, u)
    }

    pub fn f_u(&self, k: f64, u: f64) -> f64 {
        (self.f_u)(k, u)
    }

    pub fn g_u(&self, l: f64, u: f64) -> f64 {
        (self.g_u)(l, u)
    }

    pub fn f_k(&self, k: f64, u: f64) -> f64 {
        (self.f_k)(k, u)
    }

    pub fn g_l(&self, l: f64, u: f64) -> f64 {
        (self.g_l)(l, u)
    }

    /// The symbol `s(xi, k, l, u) = xi_1 f_u(k, u) + xi_2 g_u(l, u)`.
    pub fn symbol(&self, xi: (f64, f64), k: f64, l: f64, u: f64) -> f64 {
        xi.0 * self.f_u(k, u) + xi.1 * self.g_u(l, u)
    }

    fn check_state(&self, u: f64) -> Result<()> {
        let (a, b) = self.state_bounds;
        // allow roundoff-level excursions from solver states
        if u < a - 1e-9 || u > b + 1e-9 {
            return Err(Error::argument(format!("state u = {u} outside [{a}, {b}]")));
        }
        Ok(())
    }

    fn check_coeff(&self, c: f64, label: &str) -> Result<()> {
        let (alpha, beta) = self.coeff_bounds;
        if c < alpha - 1e-9 || c > beta + 1e-9 {
            return Err(Error::argument(format!(
                "coefficient {label} = {c} outside [{alpha}, {beta}]"
            )));
        }
        Ok(())
    }

    /// Entropy flux `F(k, u) = integral_a^u (f_u(k, s))^2 ds`, `F(k, a) = 0`.
    pub fn entropy_flux_f(&self, k: f64, u: f64) -> Result<f64> {
        self.check_coeff(k, "k")?;
        self.check_state(u)?;
        Ok(self.quad(u, |s| {
            let d = self.f_u(k, s);
            d * d
        }))
    }

    /// Entropy flux `G(l, u) = integral_a^u (g_u(l, s))^2 ds`, `G(l, a) = 0`.
    pub fn entropy_flux_g(&self, l: f64, u: f64) -> Result<f64> {
        self.check_coeff(l, "l")?;
        self.check_state(u)?;
        Ok(self.quad(u, |s| {
            let d = self.g_u(l, s);
            d * d
        }))
    }

    /// Cross entropy flux `H(k, l, u) = integral_a^u f_u g_u ds`, `H(k, l, a) = 0`.
    pub fn entropy_flux_h(&self, k: f64, l: f64, u: f64) -> Result<f64> {
        self.check_coeff(k, "k")?;
        self.check_coeff(l, "l")?;
        self.check_state(u)?;
        Ok(self.quad(u, |s| self.f_u(k, s) * self.g_u(l, s)))
    }

    /// Singular mapping `Psi(k, u) = integral_a^u |f_u(k, s)| ds`.
    ///
    /// Monotone nondecreasing in `u` for each `k` (nonnegative integrand and
    /// positive quadrature weights). The integrand has kinks where `f_u`
    /// changes sign, so this uses a composite rule instead of one panel.
    pub fn singular_mapping_psi(&self, k: f64, u: f64) -> Result<f64> {
        self.check_coeff(k, "k")?;
        self.check_state(u)?;
        let a = self.state_bounds.0;
        if (u - a).abs() < DEGENERATE_INTERVAL {
            return Ok(0.0);
        }
        Ok(psi_rule().integrate_composite(a, u, 16, |s| self.f_u(k, s).abs()))
    }

    fn quad<F: FnMut(f64) -> f64>(&self, u: f64, f: F) -> f64 {
        let a = self.state_bounds.0;
        if (u - a).abs() < DEGENERATE_INTERVAL {
            return 0.0;
        }
        gauss64().integrate(a, u, f)
    }

    /// Check that the state endpoints are flux-free: `f(k, a) = f(k, b) =
    /// g(l, a) = g(l, b) = 0` on `n_samples` equispaced coefficients, which
    /// makes `[a, b]` an invariant region for the viscous problem.
    pub fn check_invariant_region(&self, n_samples: usize) -> Result<InvariantRegionReport> {
        if n_samples < 2 {
            return Err(Error::argument("n_samples must be at least 2"));
        }
        let (a, b) = self.state_bounds;
        let mut max_violation: f64 = 0.0;
        for c in sample_points(self.coeff_bounds.0, self.coeff_bounds.1, n_samples) {
            for v in [self.f(c, a), self.f(c, b), self.g(c, a), self.g(c, b)] {
                max_violation = max_violation.max(v.abs());
            }
        }
        Ok(InvariantRegionReport { pass: max_violation <= 1e-12, max_violation })
    }

    /// Sampling-based genuine-nonlinearity check; see [`NonlinearityReport`].
    ///
    /// Pass iff the worst zero fraction stays below `2/n_u` plus the declared
    /// slack [`NONLINEARITY_SLACK`]. A measure-zero zero set is not decidable
    /// from samples, so this is documented as a heuristic: it reliably flags
    /// symbols that vanish on intervals (linear or aligned flux pairs).
    pub fn check_nonlinearity(
        &self,
        n_xi: usize,
        n_kl: usize,
        n_u: usize,
        zero_tol: f64,
    ) -> Result<NonlinearityReport> {
        if n_xi < 2 || n_kl < 2 || n_u < 2 {
            return Err(Error::argument("all sample counts must be at least 2"));
        }
        if zero_tol <= 0.0 {
            return Err(Error::argument("zero_tol must be positive"));
        }
        let (a, b) = self.state_bounds;
        let us: Vec<f64> = sample_points(a, b, n_u).collect();
        let ks: Vec<f64> = sample_points(self.coeff_bounds.0, self.coeff_bounds.1, n_kl).collect();

        let mut worst = NonlinearityReport {
            pass: false,
            worst_zero_fraction: 0.0,
            worst_xi: (1.0, 0.0),
            worst_kl: (ks[0], ks[0]),
            threshold: 2.0 / n_u as f64 + NONLINEARITY_SLACK,
        };
        for i in 0..n_xi {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / n_xi as f64;
            let xi = (theta.cos(), theta.sin());
            for &k in &ks {
                for &l in &ks {
                    let zeros = us
                        .iter()
                        .filter(|&&u| self.symbol(xi, k, l, u).abs() <= zero_tol)
                        .count();
                    let fraction = zeros as f64 / n_u as f64;
                    if fraction > worst.worst_zero_fraction {
                        worst.worst_zero_fraction = fraction;
                        worst.worst_xi = xi;
                        worst.worst_kl = (k, l);
                    }
                }
            }
        }
        worst.pass = worst.worst_zero_fraction <= worst.threshold;
        Ok(worst)
    }

    /// Compare the supplied analytic derivatives against central finite
    /// differences of `f` and `g` on an interior sample grid.
    pub fn check_derivative_consistency(
        &self,
        n_samples: usize,
        tol: f64,
    ) -> Result<DerivativeConsistencyReport> {
        if n_samples < 2 {
            return Err(Error::argument("n_samples must be at least 2"));
        }
        let (a, b) = self.state_bounds;
        let (alpha, beta) = self.coeff_bounds;
        let eu = 1e-6 * (b - a);
        let ec = (1e-6 * (beta - alpha)).max(1e-12);

        let mut rep = DerivativeConsistencyReport {
            pass: false,
            max_error_f_u: 0.0,
            max_error_g_u: 0.0,
            max_error_f_k: 0.0,
            max_error_g_l: 0.0,
        };
        // stay strictly inside the boxes so the stencil never leaves them
        for c in sample_points(alpha + ec, beta - ec, n_samples) {
            for u in sample_points(a + eu, b - eu, n_samples) {
                let fd_fu = (self.f(c, u + eu) - self.f(c, u - eu)) / (2.0 * eu);
                let fd_gu = (self.g(c, u + eu) - self.g(c, u - eu)) / (2.0 * eu);
                rep.max_error_f_u = rep.max_error_f_u.max((fd_fu - self.f_u(c, u)).abs());
                rep.max_error_g_u = rep.max_error_g_u.max((fd_gu - self.g_u(c, u)).abs());
                if beta > alpha {
                    let fd_fk = (self.f(c + ec, u) - self.f(c - ec, u)) / (2.0 * ec);
                    let fd_gl = (self.g(c + ec, u) - self.g(c - ec, u)) / (2.0 * ec);
                    rep.max_error_f_k = rep.max_error_f_k.max((fd_fk - self.f_k(c, u)).abs());
                    rep.max_error_g_l = rep.max_error_g_l.max((fd_gl - self.g_l(c, u)).abs());
                }
            }
        }
        rep.pass = rep.max_error_f_u.max(rep.max_error_g_u).max(rep.max_error_f_k).max(rep.max_error_g_l) <= tol;
        Ok(rep)
    }

    /// Sampled `max |f_u|` over `k` in `[k_lo, k_hi]` and the full state box.
    /// Used for wave-speed bounds; dense sampling, no inflation.
    pub fn max_abs_f_u(&self, k_lo: f64, k_hi: f64, n_k: usize, n_u: usize) -> f64 {
        let (a, b) = self.state_bounds;
        let mut m: f64 = 0.0;
        for k in sample_points(k_lo, k_hi, n_k.max(2)) {
            for u in sample_points(a, b, n_u.max(2)) {
                m = m.max(self.f_u(k, u).abs());
            }
        }
        m
    }

    /// Sampled `max |g_u|` over `l` in `[l_lo, l_hi]` and the full state box.
    pub fn max_abs_g_u(&self, l_lo: f64, l_hi: f64, n_l: usize, n_u: usize) -> f64 {
        let (a, b) = self.state_bounds;
        let mut m: f64 = 0.0;
        for l in sample_points(l_lo, l_hi, n_l.max(2)) {
            for u in sample_points(a, b, n_u.max(2)) {
                m = m.max(self.g_u(l, u).abs());
            }
        }
        m
    }
}

fn psi_rule() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// `n` equispaced points on [lo, hi], endpoints included.
pub(crate) fn sample_points(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| lo + step * i as f64)
}

/// Built-in flux families, selectable by name from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxFamily {
    /// `f = k u(1-u)`, `g = l u(1-u)`. Satisfies the invariant-region
    /// condition on [0, 1] but the two fluxes are aligned, so the
    /// nonlinearity check flags it (negative control for alignment).
    MultiplicativeBurgers,
    /// `f = k u^2/2`, `g = l u^3/3`. Genuinely nonlinear skew pair; does not
    /// vanish at the state endpoints (quadrature and concavity testing only).
    SkewMonomial,
    /// `f = k u`, `g = l u`. Linear negative control: constant symbol and
    /// nonzero endpoint fluxes.
    Linear,
    /// `f = k u^2 (1-u)^2 / 2`, `g = l u^3 (1-u)`. The default resonant
    /// pair on [0, 1]: endpoint fluxes vanish, the symbol is a nontrivial
    /// cubic in `u` for every unit direction (so its zero set is finite),
    /// and `f_u` changes sign inside the state box.
    ResonantSkew,
    /// `f = k u^2/2`, `g = 0`. One-dimensional viscous Burgers reduction
    /// used for the independent reference-solver cross-check.
    Quadratic1d,
}

impl FluxFamily {
    /// Instantiate the family on the given state and coefficient boxes.
    pub fn build(self, state_bounds: (f64, f64), coeff_bounds: (f64, f64)) -> Result<FluxModel> {
        let zero: FluxFn = Arc::new(|_, _| 0.0);
        match self {
            FluxFamily::MultiplicativeBurgers => FluxModel::new(
                "multiplicative_burgers",
                Arc::new(|k, u| k * u * (1.0 - u)),
                Arc::new(|l, u| l * u * (1.0 - u)),
                Arc::new(|k, u| k * (1.0 - 2.0 * u)),
                Arc::new(|l, u| l * (1.0 - 2.0 * u)),
                Arc::new(|_, u| u * (1.0 - u)),
                Arc::new(|_, u| u * (1.0 - u)),
                state_bounds,
                coeff_bounds,
            ),
            FluxFamily::SkewMonomial => FluxModel::new(
                "skew_monomial",
                Arc::new(|k, u| k * u * u / 2.0),
                Arc::new(|l, u| l * u * u * u / 3.0),
                Arc::new(|k, u| k * u),
                Arc::new(|l, u| l * u * u),
                Arc::new(|_, u| u * u / 2.0),
                Arc::new(|_, u| u * u * u / 3.0),
                state_bounds,
                coeff_bounds,
            ),
            FluxFamily::Linear => FluxModel::new(
                "linear",
                Arc::new(|k, u| k * u),
                Arc::new(|l, u| l * u),
                Arc::new(|k, _| k),
                Arc::new(|l, _| l),
                Arc::new(|_, u| u),
                Arc::new(|_, u| u),
                state_bounds,
                coeff_bounds,
            ),
            FluxFamily::ResonantSkew => FluxModel::new(
                "resonant_skew",
                Arc::new(|k, u| 0.5 * k * u * u * (1.0 - u) * (1.0 - u)),
                Arc::new(|l, u| l * u * u * u * (1.0 - u)),
                Arc::new(|k, u| k * u * (1.0 - u) * (1.0 - 2.0 * u)),
                Arc::new(|l, u| l * u * u * (3.0 - 4.0 * u)),
                Arc::new(|_, u| 0.5 * u * u * (1.0 - u) * (1.0 - u)),
                Arc::new(|_, u| u * u * u * (1.0 - u)),
                state_bounds,
                coeff_bounds,
            ),
            FluxFamily::Quadratic1d => FluxModel::new(
                "quadratic_1d",
                Arc::new(|k, u| 0.5 * k * u * u),
                zero.clone(),
                Arc::new(|k, u| k * u),
                zero.clone(),
                Arc::new(|_, u| 0.5 * u * u),
                zero,
                state_bounds,
                coeff_bounds,
            ),
        }
    }
}
