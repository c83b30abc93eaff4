//! Viscous approximation and verification toolkit for the two-dimensional
//! scalar conservation law
//!
//! ```text
//! u_t + f(k(x,y), u)_x + g(l(x,y), u)_y = 0,
//! ```
//!
//! where the coefficients `k`, `l` are merely bounded and of bounded
//! variation (typically piecewise constant), so the equation is resonant:
//! characteristic speeds may coincide and classical BV compactness fails.
//!
//! The crate builds the regularized problem
//!
//! ```text
//! u_t + f(k_delta, u)_x + g(l_delta, u)_y = epsilon * (u_xx + u_yy),
//! ```
//!
//! with mollified coefficients `k_delta = omega_delta * k` and the two
//! smoothing parameters kept in balance (`delta = C * epsilon`), advances it
//! with an explicit monotone finite-difference scheme, and measures every
//! a-priori estimate the existence theory rests on: the invariant region,
//! the `L1` time-Lipschitz bound, the entropy dissipation bound, the
//! `W^{-1,2}` compactness of the entropy-production fields, and the weak-form
//! residual of the limit equation.
//!
//! Entry points:
//!
//! - [`flux::FluxModel`] — flux pairs with analytic derivatives plus the
//!   structural checkers (invariant region, genuine nonlinearity).
//! - [`field`] / [`mollify`] — gridded fields, piecewise-constant
//!   coefficients, total variation, and the scaled mollifier.
//! - [`solver::SolverRun`] — one `(epsilon, delta)` parabolic solve.
//! - [`monitor`] — per-run estimate monitors (Lipschitz, dissipation, ...).
//! - [`compactness`] — entropy fields, div/curl, `W^{-1,2}` proxy norms,
//!   and the div-curl product test.
//! - [`harness`] — the balanced refinement sweep, pairwise `L1` Cauchy
//!   distances, and weak-solution residuals.
//! - [`scenario`] — the shipped test scenarios (positive and negative
//!   controls), loadable by name.
//!
//! The `resonant2d` binary exposes `run`, `sweep`, and `report` subcommands
//! over TOML configuration files; see the repository README and the
//! `examples/` directory for end-to-end usage.

pub mod compactness;
pub mod config;
pub mod error;
pub mod field;
pub mod flux;
pub mod harness;
pub mod mollify;
pub mod monitor;
pub mod quadrature;
pub mod scenario;
pub mod solver;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
