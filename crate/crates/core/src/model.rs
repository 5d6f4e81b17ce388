//! Equation data: degree, periodic coefficients, impulse schedule.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action_angle::{ActionAngleChart, ChartError};
use crate::expr::{Bindings, EvalError, Expr, ParseError, Var};
use crate::flow::IntegratorSettings;
use crate::impulse::JumpMap;

/// Sample count of the periodicity check on coefficients.
const PERIODICITY_SAMPLES: usize = 64;
const PERIODICITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config schema error: {0}")]
    Schema(String),
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("expression `{field}`: {source}")]
    Expression { field: String, source: ParseError },
    #[error("unknown preset `{0}` (available: paper-n1, unperturbed-n1, unperturbed-n2)")]
    UnknownPreset(String),
    #[error(transparent)]
    Chart(#[from] ChartError),
}

/// Point of the phase plane with its time stamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlaneState {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl PlaneState {
    pub fn new(x: f64, y: f64, t: f64) -> Self {
        PlaneState { x, y, t }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.t.is_finite()
    }
}

/// A 1-periodic coefficient `p_j(t)`. Users must supply smooth expressions;
/// only periodicity is checked.
#[derive(Debug, Clone)]
pub struct PeriodicFunction {
    expr: Expr,
    degree: f64,
}

impl PeriodicFunction {
    pub fn parse(src: &str, degree: u32) -> Result<Self, ModelError> {
        let expr =
            Expr::parse(src, &[Var::T, Var::N]).map_err(|source| ModelError::Expression {
                field: src.to_string(),
                source,
            })?;
        let f = PeriodicFunction {
            expr,
            degree: degree as f64,
        };
        f.check_periodic()?;
        Ok(f)
    }

    fn check_periodic(&self) -> Result<(), ModelError> {
        for k in 0..PERIODICITY_SAMPLES {
            let t = k as f64 / PERIODICITY_SAMPLES as f64;
            let eval = |t| {
                self.eval(t).map_err(|e| {
                    ModelError::Validation(format!(
                        "coefficient `{}` at t={t}: {e}",
                        self.expr.source()
                    ))
                })
            };
            let (a, b) = (eval(t)?, eval(t + 1.0)?);
            if (a - b).abs() >= PERIODICITY_TOL * a.abs().max(1.0) {
                return Err(ModelError::Validation(format!(
                    "coefficient `{}` is not 1-periodic: f({t}) = {a}, f({}) = {b}",
                    self.expr.source(),
                    t + 1.0
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        self.expr
            .eval(&Bindings::new().with(Var::T, t).with(Var::N, self.degree))
    }

    pub fn is_zero(&self) -> bool {
        self.expr.is_zero()
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }
}

/// One impulse of the period: jump map applied at time `time ∈ [0, 1)`.
#[derive(Debug, Clone)]
pub struct Impulse {
    pub time: f64,
    pub map: JumpMap,
}

/// The impulsive Duffing-type equation
/// `x' = y`, `y' = -x^(2n+1) - Σ p_i(t) x^i` with jumps at fixed `t_j`.
#[derive(Debug, Clone)]
pub struct System {
    degree: u32,
    coeffs: Vec<PeriodicFunction>,
    impulses: Vec<Impulse>,
    chart: Arc<ActionAngleChart>,
    settings: IntegratorSettings,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub n: u32,
    pub coeffs: Vec<String>,
    #[serde(default)]
    pub impulses: Vec<ImpulseSpec>,
    #[serde(default)]
    pub integrator: Option<IntegratorSettings>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct ImpulseSpec {
    pub t: f64,
    #[serde(flatten)]
    pub map: JumpSpec,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpSpec {
    PlaneExpr {
        #[serde(rename = "I", alias = "i")]
        i: String,
        #[serde(rename = "J", alias = "j")]
        j: String,
    },
    ActionAngle {
        dlambda: String,
        dtheta: String,
    },
    Composed {
        maps: Vec<JumpSpec>,
    },
}

impl ConfigDocument {
    pub fn from_toml(text: &str) -> Result<Self, ModelError> {
        toml::from_str(text).map_err(|e| ModelError::Schema(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config documents always serialise")
    }
}

/// Canonical regression scenario: n = 1, p_0 = 0.1 sin 2πt, and the
/// twist impulse Δθ = 1/λ², Δλ = 0 at t = 1/2.
pub const PRESET_PAPER_N1: &str = r#"n = 1
coeffs = ["0.1*sin(2*pi*t)", "0", "0"]

[[impulses]]
t = 0.5
kind = "action_angle"
dlambda = "0"
dtheta = "1/l^2"
"#;

const PRESET_UNPERTURBED_N1: &str = r#"n = 1
coeffs = ["0", "0", "0"]
"#;

const PRESET_UNPERTURBED_N2: &str = r#"n = 2
coeffs = ["0", "0", "0", "0", "0"]
"#;

pub fn preset(name: &str) -> Result<ConfigDocument, ModelError> {
    let text = match name {
        "paper-n1" => PRESET_PAPER_N1,
        "unperturbed-n1" => PRESET_UNPERTURBED_N1,
        "unperturbed-n2" => PRESET_UNPERTURBED_N2,
        other => return Err(ModelError::UnknownPreset(other.to_string())),
    };
    ConfigDocument::from_toml(text)
}

impl System {
    /// Validates a config document and compiles all expressions.
    pub fn build(config: &ConfigDocument) -> Result<System, ModelError> {
        let degree = config.n;
        if degree < 1 {
            return Err(ModelError::Validation("n must be at least 1".into()));
        }
        let slots = 2 * degree as usize + 1;
        if config.coeffs.len() != slots {
            return Err(ModelError::Validation(format!(
                "n = {degree} needs {slots} coefficients p_0..p_{}, got {}",
                slots - 1,
                config.coeffs.len()
            )));
        }
        let coeffs = config
            .coeffs
            .iter()
            .map(|src| PeriodicFunction::parse(src, degree))
            .collect::<Result<Vec<_>, _>>()?;
        let chart = Arc::new(ActionAngleChart::new(degree)?);
        let mut impulses = Vec::with_capacity(config.impulses.len());
        let mut last = f64::NEG_INFINITY;
        for spec in &config.impulses {
            let t = spec.t;
            if !(0.0..1.0).contains(&t) {
                return Err(ModelError::Validation(format!(
                    "impulse time {t} is outside [0, 1)"
                )));
            }
            if t <= last {
                return Err(ModelError::Validation(format!(
                    "impulse times must be strictly increasing ({last} then {t})"
                )));
            }
            last = t;
            impulses.push(Impulse {
                time: t,
                map: JumpMap::from_spec(&spec.map, &chart)?,
            });
        }
        let settings = config.integrator.clone().unwrap_or_default();
        settings.validate().map_err(ModelError::Validation)?;
        Ok(System {
            degree,
            coeffs,
            impulses,
            chart,
            settings,
        })
    }

    pub fn from_preset(name: &str) -> Result<System, ModelError> {
        System::build(&preset(name)?)
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn coeffs(&self) -> &[PeriodicFunction] {
        &self.coeffs
    }

    pub fn impulses(&self) -> &[Impulse] {
        &self.impulses
    }

    pub fn chart(&self) -> &ActionAngleChart {
        &self.chart
    }

    pub fn shared_chart(&self) -> Arc<ActionAngleChart> {
        Arc::clone(&self.chart)
    }

    /// Integrator settings from the config, or the defaults.
    pub fn settings(&self) -> &IntegratorSettings {
        &self.settings
    }

    /// True when every coefficient is the literal zero.
    pub fn is_autonomous(&self) -> bool {
        self.coeffs.iter().all(PeriodicFunction::is_zero)
    }

    /// `(Σ p_i(t) x^i, Σ i p_i(t) x^(i-1))`, the forcing and its x-derivative.
    pub fn forcing(&self, t: f64, x: f64) -> Result<(f64, f64), EvalError> {
        let mut value = 0.0;
        let mut slope = 0.0;
        // Horner in x for both sums
        for p in self.coeffs.iter().rev() {
            slope = slope * x + value;
            value *= x;
            if !p.is_zero() {
                value += p.eval(t)?;
            }
        }
        Ok((value, slope))
    }

    /// `(dx/dt, dy/dt)` of the smooth part.
    pub fn vector_field(&self, s: &PlaneState) -> Result<(f64, f64), EvalError> {
        let (force, _) = self.forcing(s.t, s.x)?;
        Ok((s.y, -s.x.powi(2 * self.degree as i32 + 1) - force))
    }

    /// Unperturbed energy `x^(2n+2)/(2n+2) + y²/2`.
    pub fn h0(&self, x: f64, y: f64) -> f64 {
        h0(self.degree, x, y)
    }

    /// Full Hamiltonian `h0 + Σ p_j(t) x^(j+1)/(j+1)`.
    pub fn hamiltonian(&self, x: f64, y: f64, t: f64) -> Result<f64, EvalError> {
        let mut h = self.h0(x, y);
        for (j, p) in self.coeffs.iter().enumerate() {
            if !p.is_zero() {
                h += p.eval(t)? * x.powi(j as i32 + 1) / (j as f64 + 1.0);
            }
        }
        Ok(h)
    }
}

/// Unperturbed energy for degree `n`.
pub fn h0(degree: u32, x: f64, y: f64) -> f64 {
    let p = 2 * degree as i32 + 2;
    x.powi(p) / p as f64 + 0.5 * y * y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: u32, coeffs: &[&str], impulses: &str) -> ConfigDocument {
        let list = coeffs
            .iter()
            .map(|c| format!("\"{c}\""))
            .collect::<Vec<_>>()
            .join(", ");
        ConfigDocument::from_toml(&format!("n = {n}\ncoeffs = [{list}]\n{impulses}")).unwrap()
    }

    fn unperturbed(n: u32) -> System {
        let zeros = vec!["0"; 2 * n as usize + 1];
        System::build(&config(n, &zeros, "")).unwrap()
    }

    #[test]
    fn trivial_config_builds() {
        let sys = unperturbed(1);
        assert_eq!(sys.degree(), 1);
        assert!(sys.impulses().is_empty());
        assert!(sys.is_autonomous());
    }

    #[test]
    fn minimal_impulsive_config_builds() {
        let cfg = config(
            1,
            &["sin(2*pi*t)", "0", "0"],
            "[[impulses]]\nt = 0.5\nkind = \"action_angle\"\ndlambda = \"0\"\ndtheta = \"1/l^2\"\n",
        );
        let sys = System::build(&cfg).unwrap();
        assert_eq!(sys.impulses().len(), 1);
        assert!(!sys.is_autonomous());
    }

    #[test]
    fn invalid_schedules_are_rejected() {
        let imp = |a: f64, b: f64| {
            format!(
                "[[impulses]]\nt = {a}\nkind = \"plane_expr\"\nI = \"0\"\nJ = \"0\"\n\
                 [[impulses]]\nt = {b}\nkind = \"plane_expr\"\nI = \"0\"\nJ = \"0\"\n"
            )
        };
        let err = System::build(&config(1, &["0", "0", "0"], &imp(0.5, 0.3))).unwrap_err();
        assert!(matches!(err, ModelError::Validation(_)), "{err}");
        assert!(System::build(&config(1, &["0", "0", "0"], &imp(0.5, 0.5))).is_err());
        assert!(System::build(&config(1, &["0", "0", "0"], &imp(0.2, 1.0))).is_err());
        assert!(System::build(&config(1, &["0", "0", "0"], &imp(-0.1, 0.2))).is_err());
    }

    #[test]
    fn schema_and_coefficient_errors() {
        assert!(matches!(
            ConfigDocument::from_toml("coeffs = [\"0\"]"),
            Err(ModelError::Schema(_))
        ));
        assert!(matches!(
            System::build(&config(1, &["0", "0"], "")),
            Err(ModelError::Validation(_))
        ));
        assert!(matches!(
            System::build(&config(1, &["t", "0", "0"], "")),
            Err(ModelError::Validation(_))
        ));
        assert!(matches!(
            System::build(&config(1, &["x", "0", "0"], "")),
            Err(ModelError::Expression { .. })
        ));
        assert!(System::build(&config(0, &["0"], "")).is_err());
    }

    #[test]
    fn vector_field_examples() {
        let sys = unperturbed(1);
        assert_eq!(
            sys.vector_field(&PlaneState::new(1.0, 0.0, 0.0)).unwrap(),
            (0.0, -1.0)
        );
        assert_eq!(
            sys.vector_field(&PlaneState::new(0.0, 2.0, 0.0)).unwrap(),
            (2.0, 0.0)
        );
        let forced = System::build(&config(1, &["sin(2*pi*t)", "0", "0"], "")).unwrap();
        let (dx, dy) = forced
            .vector_field(&PlaneState::new(0.0, 0.0, 0.25))
            .unwrap();
        assert_eq!(dx, 0.0);
        assert!((dy + 1.0).abs() < 1e-15);
    }

    #[test]
    fn energy_examples() {
        let sys = unperturbed(1);
        assert_eq!(sys.h0(1.0, 0.0), 0.25);
        assert_eq!(sys.h0(0.0, 1.0), 0.5);
        for n in 1..4 {
            assert_eq!(h0(n, 0.0, 0.0), 0.0);
        }
        assert_eq!(sys.hamiltonian(1.3, -0.4, 0.7).unwrap(), sys.h0(1.3, -0.4));
        let constant = System::build(&config(1, &["1", "0", "0"], "")).unwrap();
        for &t in &[0.0, 0.3, 0.9] {
            assert_eq!(constant.hamiltonian(2.0, 0.0, t).unwrap(), 6.0);
        }
    }

    #[test]
    fn forcing_sums_all_terms() {
        let sys = System::build(&config(2, &["1", "2", "0.5", "-1", "3"], "")).unwrap();
        let x = 1.7;
        let (value, slope) = sys.forcing(0.1, x).unwrap();
        let want = 1.0 + 2.0 * x + 0.5 * x * x - x.powi(3) + 3.0 * x.powi(4);
        let want_slope = 2.0 + x - 3.0 * x * x + 12.0 * x.powi(3);
        assert!((value - want).abs() < 1e-12);
        assert!((slope - want_slope).abs() < 1e-12);
    }

    #[test]
    fn presets_build() {
        let sys = System::from_preset("paper-n1").unwrap();
        assert_eq!(sys.degree(), 1);
        assert_eq!(sys.impulses()[0].time, 0.5);
        assert!(System::from_preset("unperturbed-n2")
            .unwrap()
            .is_autonomous());
        assert!(matches!(
            System::from_preset("nope"),
            Err(ModelError::UnknownPreset(_))
        ));
    }

    #[test]
    fn config_roundtrips_through_toml() {
        let doc = preset("paper-n1").unwrap();
        let again = ConfigDocument::from_toml(&doc.to_toml()).unwrap();
        assert_eq!(again.coeffs, doc.coeffs);
        assert_eq!(again.impulses.len(), 1);
    }
}
