//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by solvers, field operations, and the sweep harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented domain or shape precondition.
    #[error("argument error: {0}")]
    Argument(String),

    /// Invalid grid, solver, or sweep configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Mollification radius too small for the grid (`delta < 2h`).
    #[error("resolution error: delta = {delta} is below 2h = {min_delta} on this grid")]
    Resolution { delta: f64, min_delta: f64 },

    /// A time step exceeded the stable step bound.
    #[error("step error: dt = {dt} exceeds the stable bound {max_dt}")]
    CflViolation { dt: f64, max_dt: f64 },

    /// Non-finite values appeared in the solution.
    #[error("divergence at t = {t} (step {step}): non-finite value at cell ({ix}, {iy})")]
    Divergence { t: f64, step: u64, ix: usize, iy: usize },

    /// A sweep level was flagged (support margin, divergence, ...).
    #[error("sweep error at level {level}: {reason}")]
    Sweep { level: usize, reason: String },

    /// Malformed snapshot, scenario, or configuration file.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
