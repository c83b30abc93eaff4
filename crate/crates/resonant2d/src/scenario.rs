//! Shipped test scenarios: flux family + coefficient patterns + initial data.
//!
//! Scenarios are stored as TOML files under `scenarios/` in the repository,
//! embedded into the binary, and loadable by name (or from a path) by the
//! CLI. Positive scenarios must fully validate; negative controls document
//! exactly which checks they fail; diagnostic scenarios exist for oracle
//! cross-checks and manufactured-solution tests and are not run through the
//! full sweep pipeline.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::field::{Grid2D, PiecewiseConstantCoeff, Rect};
use crate::flux::{FluxFamily, FluxModel};
use crate::Result;

/// How a scenario is meant to be used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioRole {
    /// Full-pipeline scenario; must pass every validation check.
    Positive,
    /// Ships to fail; `control_reason` names the failing checks.
    NegativeControl,
    /// Special-purpose input for oracle or manufactured-solution tests.
    Diagnostic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxSpec {
    pub family: FluxFamily,
    pub state_bounds: (f64, f64),
    pub coeff_bounds: (f64, f64),
}

/// A complete problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub role: ScenarioRole,
    #[serde(default)]
    pub notes: String,
    /// For negative controls: comma-separated names of the checks that fail.
    #[serde(default)]
    pub control_reason: Option<String>,
    pub domain: DomainSpec,
    pub flux: FluxSpec,
    pub coeff_k: PiecewiseConstantCoeff,
    pub coeff_l: PiecewiseConstantCoeff,
    pub initial: PiecewiseConstantCoeff,
}

/// One validation check outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Aggregated validation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioValidation {
    pub pass: bool,
    pub checks: Vec<CheckResult>,
}

impl ScenarioValidation {
    pub fn failing(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

const BUILTIN_SCENARIOS: &[(&str, &str)] = &[
    ("resonant_checkerboard", include_str!("../scenarios/resonant_checkerboard.toml")),
    ("manufactured_smooth", include_str!("../scenarios/manufactured_smooth.toml")),
    ("linear_control", include_str!("../scenarios/linear_control.toml")),
    ("burgers_1d", include_str!("../scenarios/burgers_1d.toml")),
];

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(format!("scenario: {e}")))
    }

    pub fn load_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Names of the scenarios shipped with the crate.
    pub fn builtin_names() -> Vec<&'static str> {
        BUILTIN_SCENARIOS.iter().map(|(n, _)| *n).collect()
    }

    /// Load a shipped scenario by name.
    pub fn by_name(name: &str) -> Result<Self> {
        for (n, text) in BUILTIN_SCENARIOS {
            if *n == name {
                return Self::from_toml_str(text);
            }
        }
        Err(Error::argument(format!(
            "unknown scenario '{name}' (shipped: {})",
            Self::builtin_names().join(", ")
        )))
    }

    pub fn model(&self) -> Result<FluxModel> {
        self.flux.family.build(self.flux.state_bounds, self.flux.coeff_bounds)
    }

    /// Grid over the scenario domain with `nx` cells in x; `ny` follows from
    /// the square-cell requirement and must come out integral.
    pub fn grid(&self, nx: usize) -> Result<Grid2D> {
        let d = &self.domain;
        let ex = d.x_max - d.x_min;
        let ey = d.y_max - d.y_min;
        if !(ex > 0.0 && ey > 0.0) {
            return Err(Error::config("scenario domain must have positive extents"));
        }
        let ny_exact = nx as f64 * ey / ex;
        let ny = ny_exact.round() as usize;
        if (ny_exact - ny as f64).abs() > 1e-9 {
            return Err(Error::config(format!(
                "nx = {nx} does not tile the domain with square cells (ny = {ny_exact})"
            )));
        }
        Grid2D::new(d.x_min, d.x_max, d.y_min, d.y_max, nx, ny)
    }

    /// Bounding box of the initial blocks that differ from the far-field
    /// state; the default compactness window.
    pub fn initial_support_bbox(&self) -> Option<Rect> {
        let a = self.flux.state_bounds.0;
        let mut bbox: Option<Rect> = None;
        for b in &self.initial.blocks {
            if (b.value - a).abs() < 1e-14 {
                continue;
            }
            bbox = Some(match bbox {
                None => b.rect(),
                Some(r) => Rect {
                    x0: r.x0.min(b.x0),
                    x1: r.x1.max(b.x1),
                    y0: r.y0.min(b.y0),
                    y1: r.y1.max(b.y1),
                },
            });
        }
        bbox
    }

    /// Run every structural and bound check and aggregate the outcomes.
    pub fn validate(&self) -> Result<ScenarioValidation> {
        let model = self.model()?;
        let (a, b) = self.flux.state_bounds;
        let (alpha, beta) = self.flux.coeff_bounds;
        let mut checks = Vec::new();

        let deriv = model.check_derivative_consistency(17, 1e-5)?;
        checks.push(CheckResult {
            name: "derivative_consistency".into(),
            pass: deriv.pass,
            detail: format!(
                "max finite-difference errors: f_u {:.2e}, g_u {:.2e}, f_k {:.2e}, g_l {:.2e}",
                deriv.max_error_f_u, deriv.max_error_g_u, deriv.max_error_f_k, deriv.max_error_g_l
            ),
        });

        let inv = model.check_invariant_region(33)?;
        checks.push(CheckResult {
            name: "check_invariant_region".into(),
            pass: inv.pass,
            detail: format!("max endpoint flux magnitude {:.3e}", inv.max_violation),
        });

        let nl = model.check_nonlinearity(16, 9, 201, 1e-6)?;
        checks.push(CheckResult {
            name: "check_nonlinearity".into(),
            pass: nl.pass,
            detail: format!(
                "worst zero fraction {:.4} (threshold {:.4}) at xi = ({:.3}, {:.3}), (k, l) = ({:.3}, {:.3})",
                nl.worst_zero_fraction, nl.threshold, nl.worst_xi.0, nl.worst_xi.1,
                nl.worst_kl.0, nl.worst_kl.1
            ),
        });

        let (klo, khi) = self.coeff_k.value_range();
        checks.push(CheckResult {
            name: "coeff_k_bounds".into(),
            pass: klo >= alpha - 1e-12 && khi <= beta + 1e-12,
            detail: format!("k range [{klo}, {khi}] vs [{alpha}, {beta}]"),
        });
        let (llo, lhi) = self.coeff_l.value_range();
        checks.push(CheckResult {
            name: "coeff_l_bounds".into(),
            pass: llo >= alpha - 1e-12 && lhi <= beta + 1e-12,
            detail: format!("l range [{llo}, {lhi}] vs [{alpha}, {beta}]"),
        });

        let (ulo, uhi) = self.initial.value_range();
        checks.push(CheckResult {
            name: "initial_bounds".into(),
            pass: ulo >= a - 1e-12 && uhi <= b + 1e-12,
            detail: format!("u0 range [{ulo}, {uhi}] vs [{a}, {b}]"),
        });

        // far-field compatibility: u0 = a on a frame of width >= 20% of the domain
        let d = &self.domain;
        let frame = 0.2 * (d.x_max - d.x_min).min(d.y_max - d.y_min);
        let mut frame_ok = (self.initial.background - a).abs() < 1e-14;
        let mut frame_detail = if frame_ok {
            format!("background equals far-field state {a}")
        } else {
            format!("background {} differs from far-field state {a}", self.initial.background)
        };
        for blk in &self.initial.blocks {
            if (blk.value - a).abs() < 1e-14 {
                continue;
            }
            let inside = blk.x0 >= d.x_min + frame
                && blk.x1 <= d.x_max - frame
                && blk.y0 >= d.y_min + frame
                && blk.y1 <= d.y_max - frame;
            if !inside {
                frame_ok = false;
                frame_detail =
                    format!("initial block [{}, {}] x [{}, {}] intrudes into the {frame}-wide far-field frame",
                        blk.x0, blk.x1, blk.y0, blk.y1);
                break;
            }
        }
        checks.push(CheckResult { name: "farfield_frame".into(), pass: frame_ok, detail: frame_detail });

        let pass = checks.iter().all(|c| c.pass);
        Ok(ScenarioValidation { pass, checks })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtins_parse() {
        for name in Scenario::builtin_names() {
            let s = Scenario::by_name(name).unwrap();
            assert_eq!(s.name, name);
        }
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(Scenario::by_name("no_such_scenario").is_err());
    }

    #[test]
    fn resonant_checkerboard_validates_positively() {
        let s = Scenario::by_name("resonant_checkerboard").unwrap();
        assert_eq!(s.role, ScenarioRole::Positive);
        let v = s.validate().unwrap();
        assert!(v.pass, "failing checks: {:?}", v.failing());
    }

    #[test]
    fn linear_control_fails_exactly_its_documented_checks() {
        let s = Scenario::by_name("linear_control").unwrap();
        assert_eq!(s.role, ScenarioRole::NegativeControl);
        let v = s.validate().unwrap();
        assert!(!v.pass);
        let mut failing = v.failing();
        failing.sort_unstable();
        let mut documented: Vec<&str> =
            s.control_reason.as_deref().unwrap().split(',').map(str::trim).collect();
        documented.sort_unstable();
        assert_eq!(failing, documented, "documented reasons must match observed failures");
        assert!(failing.contains(&"check_nonlinearity"));
    }

    #[test]
    fn out_of_bounds_initial_data_is_reported() {
        let mut s = Scenario::by_name("resonant_checkerboard").unwrap();
        for blk in &mut s.initial.blocks {
            blk.value = 1.5; // above b = 1
        }
        let v = s.validate().unwrap();
        assert!(!v.pass);
        assert!(v.failing().contains(&"initial_bounds"));
    }

    #[test]
    fn grid_construction_respects_aspect() {
        let s = Scenario::by_name("resonant_checkerboard").unwrap();
        let g = s.grid(64).unwrap();
        assert_eq!((g.nx, g.ny), (64, 64));
    }

    #[test]
    fn toml_round_trip_preserves_scenario() {
        let s = Scenario::by_name("resonant_checkerboard").unwrap();
        let text = toml::to_string(&s).unwrap();
        let back = Scenario::from_toml_str(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"
name = "x"
role = "positive"
typo_key = 1
[domain]
x_min = 0.0
x_max = 1.0
y_min = 0.0
y_max = 1.0
[flux]
family = "linear"
state_bounds = [0.0, 1.0]
coeff_bounds = [1.0, 1.0]
[coeff_k]
background = 1.0
[coeff_l]
background = 1.0
[initial]
background = 0.0
"#;
        assert!(Scenario::from_toml_str(text).is_err());
    }

    #[test]
    fn initial_support_bbox_covers_blocks() {
        let s = Scenario::by_name("resonant_checkerboard").unwrap();
        let bbox = s.initial_support_bbox().unwrap();
        assert!(bbox.width() > 0.0 && bbox.height() > 0.0);
    }
}
