//! Per-run estimate monitors.
//!
//! At each output time the solver records the discrete analogues of the
//! quantities the existence proof bounds a priori:
//!
//! - the state extrema (invariant-region check),
//! - `sum |u^{n+1} - u^n| h^2 / dt`, the `L1` norm of the discrete time
//!   derivative (time-Lipschitz bound),
//! - `epsilon * sum ((D_x u)^2 + (D_y u)^2) h^2`, the entropy dissipation,
//! - the distance of the numerical support from the domain boundary,
//! - optionally the total variation of the singular mapping `Psi(k, u)`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// One monitor row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorSample {
    pub t: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// `max |u|`.
    pub linf: f64,
    /// `sum |u^{n+1} - u^n| h^2 / dt` for the step landing on `t`; at `t = 0`
    /// this is the forward quotient of the first step, which coincides with
    /// the backward quotient for forward Euler.
    pub l1_time_derivative: f64,
    /// `epsilon * sum ((D_x u)^2 + (D_y u)^2) h^2`, forward differences over
    /// interior cell pairs.
    pub entropy_dissipation: f64,
    /// Distance of `{u > a + 1e-6}` from the domain boundary; half the
    /// smaller extent when the set is empty.
    pub support_margin: f64,
    pub psi_tv: Option<f64>,
}

/// Append-only monitor time series.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MonitorSeries {
    pub times: Vec<f64>,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    pub linf: Vec<f64>,
    pub l1_time_derivative: Vec<f64>,
    pub entropy_dissipation: Vec<f64>,
    pub support_margin: Vec<f64>,
    /// Present only when the run records the singular-mapping diagnostic.
    pub psi_tv: Option<Vec<f64>>,
}

impl MonitorSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, s: MonitorSample) {
        self.times.push(s.t);
        self.u_min.push(s.u_min);
        self.u_max.push(s.u_max);
        self.linf.push(s.linf);
        self.l1_time_derivative.push(s.l1_time_derivative);
        self.entropy_dissipation.push(s.entropy_dissipation);
        self.support_margin.push(s.support_margin);
        match (&mut self.psi_tv, s.psi_tv) {
            (Some(list), Some(v)) => list.push(v),
            (None, Some(v)) if self.times.len() == 1 => self.psi_tv = Some(vec![v]),
            (None, None) => {}
            (Some(_), None) | (None, Some(_)) => {
                // a series either records psi_tv from the start or never
                panic!("inconsistent psi_tv recording");
            }
        }
    }

    /// Largest entropy dissipation over the series.
    pub fn max_entropy_dissipation(&self) -> f64 {
        self.entropy_dissipation.iter().fold(0.0_f64, |m, &v| m.max(v))
    }

    /// One row per output time, CSV with a header line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from(
            "time,u_min,u_max,linf,l1_time_derivative,entropy_dissipation,support_margin,psi_tv\n",
        );
        for i in 0..self.len() {
            let psi = match &self.psi_tv {
                Some(list) => format!("{}", list[i]),
                None => String::new(),
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.times[i],
                self.u_min[i],
                self.u_max[i],
                self.linf[i],
                self.l1_time_derivative[i],
                self.entropy_dissipation[i],
                self.support_margin[i],
                psi
            )
            .expect("write to string");
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Bounds for [`check_lemma_bounds`]. `c0` is conventionally the first
/// positive-time `l1_time_derivative` sample times 1.05 (the proof shows
/// decay from the initial value); `c_energy` is a per-family constant fitted
/// once on the coarsest sweep member.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LemmaBounds {
    pub state_box: (f64, f64),
    pub c0: f64,
    pub c_energy: f64,
}

impl LemmaBounds {
    /// Conventional `c0` from a series: first sample times 1.05.
    pub fn c0_from(series: &MonitorSeries) -> Result<f64> {
        if series.is_empty() {
            return Err(Error::argument("monitor series is empty"));
        }
        Ok(series.l1_time_derivative[0] * 1.05)
    }
}

/// Result of checking a monitor series against the lemma bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaReport {
    /// State extrema within `[a - 1e-12, b + 1e-12]` at all times.
    pub invariant_region_ok: bool,
    /// `l1_time_derivative <= c0` at all times.
    pub time_lipschitz_ok: bool,
    /// `entropy_dissipation <= c_energy` at all times.
    pub energy_ok: bool,
    pub pass: bool,
    /// Time of the first failed check, with its name.
    pub first_violation: Option<(String, f64)>,
}

/// Check a series against the invariant-region, time-Lipschitz, and entropy
/// dissipation bounds. Report-only.
pub fn check_lemma_bounds(series: &MonitorSeries, bounds: &LemmaBounds) -> Result<LemmaReport> {
    if series.is_empty() {
        return Err(Error::argument("monitor series is empty"));
    }
    let (a, b) = bounds.state_box;
    let mut report = LemmaReport {
        invariant_region_ok: true,
        time_lipschitz_ok: true,
        energy_ok: true,
        pass: true,
        first_violation: None,
    };
    let violate = |report: &mut LemmaReport, what: &str, t: f64| {
        if report.first_violation.is_none() {
            report.first_violation = Some((what.to_string(), t));
        }
    };
    for i in 0..series.len() {
        let t = series.times[i];
        if series.u_min[i] < a - 1e-12 || series.u_max[i] > b + 1e-12 {
            if report.invariant_region_ok {
                violate(&mut report, "invariant_region", t);
            }
            report.invariant_region_ok = false;
        }
        if series.l1_time_derivative[i] > bounds.c0 {
            if report.time_lipschitz_ok {
                violate(&mut report, "time_lipschitz", t);
            }
            report.time_lipschitz_ok = false;
        }
        if series.entropy_dissipation[i] > bounds.c_energy {
            if report.energy_ok {
                violate(&mut report, "entropy_dissipation", t);
            }
            report.energy_ok = false;
        }
    }
    report.pass = report.invariant_region_ok && report.time_lipschitz_ok && report.energy_ok;
    Ok(report)
}

/// Check that `l1_time_derivative` is nonincreasing up to a relative slack;
/// returns the index of the first violating sample, if any. The discrete
/// scheme is `L1`-contractive in time differences while it is monotone, so a
/// violation beyond slack points at the step where monotonicity was lost.
pub fn l1_nonincreasing_violation(series: &MonitorSeries, rel_slack: f64) -> Option<usize> {
    let list = &series.l1_time_derivative;
    for i in 1..list.len() {
        if list[i] > list[i - 1] * (1.0 + rel_slack) {
            return Some(i);
        }
    }
    None
}
