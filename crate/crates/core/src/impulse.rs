//! Jump maps, their synthesis through the action-angle chart, and numerical
//! checks of the area and decay conditions.

use std::sync::Arc;

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::action_angle::{ActionAngle, ActionAngleChart, ChartError};
use crate::expr::{Bindings, EvalError, Expr, Var};
use crate::model::{JumpSpec, ModelError, PlaneState};
use crate::reference::Branch;

/// Relative finite-difference step for jump derivatives.
pub const FD_STEP: f64 = 1e-5;
/// Largest tolerated trend slope for a weighted quantity to count as bounded.
pub const TREND_TOL: f64 = 0.02;
/// Residual bound of the area condition.
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Minimum span of scan grids, in decades.
pub const MIN_DECADES: f64 = 3.0;
const MIN_FIT_POINTS: usize = 5;
const ZERO_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JumpError {
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("grid spans {0:.2} decades, at least {MIN_DECADES} are required")]
    GridTooSmall(f64),
    #[error("degenerate fit for {quantity}: only {usable} usable points")]
    DegenerateFit { quantity: String, usable: usize },
    #[error("scan grid is empty or not increasing")]
    BadGrid,
    #[error("derivative order ({0}, {1}) is not supported (m1 + m2 <= 1)")]
    Order(u32, u32),
    #[error(transparent)]
    Jump(#[from] JumpError),
}

/// A jump `Φ(x, y) = (x + I, y + J)` applied at an impulse time.
#[derive(Debug, Clone)]
pub enum JumpMap {
    /// `I(x, y)`, `J(x, y)` given directly.
    Plane { i: Expr, j: Expr, degree: u32 },
    /// `Φ = φ₀ ∘ Q ∘ φ₀⁻¹` with `Q(λ, θ) = (λ + Δλ(λ), θ + Δθ(λ))`.
    ActionAngle {
        dlambda: Expr,
        dtheta: Expr,
        chart: Arc<ActionAngleChart>,
    },
    /// Applied left to right.
    Composed { maps: Vec<JumpMap>, degree: u32 },
}

fn parse_field(src: &str, field: &str, vars: &[Var]) -> Result<Expr, ModelError> {
    Expr::parse(src, vars).map_err(|source| ModelError::Expression {
        field: field.to_string(),
        source,
    })
}

impl JumpMap {
    pub fn from_spec(
        spec: &JumpSpec,
        chart: &Arc<ActionAngleChart>,
    ) -> Result<JumpMap, ModelError> {
        let degree = chart.degree();
        Ok(match spec {
            JumpSpec::PlaneExpr { i, j } => JumpMap::Plane {
                i: parse_field(i, "I", &[Var::X, Var::Y, Var::N])?,
                j: parse_field(j, "J", &[Var::X, Var::Y, Var::N])?,
                degree,
            },
            JumpSpec::ActionAngle { dlambda, dtheta } => JumpMap::ActionAngle {
                dlambda: parse_field(dlambda, "dlambda", &[Var::L, Var::N])?,
                dtheta: parse_field(dtheta, "dtheta", &[Var::L, Var::N])?,
                chart: Arc::clone(chart),
            },
            JumpSpec::Composed { maps } => JumpMap::Composed {
                maps: maps
                    .iter()
                    .map(|m| JumpMap::from_spec(m, chart))
                    .collect::<Result<_, _>>()?,
                degree,
            },
        })
    }

    /// Plane map from expression sources in `x`, `y`.
    pub fn plane(i: &str, j: &str, degree: u32) -> Result<JumpMap, ModelError> {
        Ok(JumpMap::Plane {
            i: parse_field(i, "I", &[Var::X, Var::Y, Var::N])?,
            j: parse_field(j, "J", &[Var::X, Var::Y, Var::N])?,
            degree,
        })
    }

    /// Action-angle prescription from expression sources in `l`.
    pub fn action_angle(
        dlambda: &str,
        dtheta: &str,
        chart: Arc<ActionAngleChart>,
    ) -> Result<JumpMap, ModelError> {
        Ok(JumpMap::ActionAngle {
            dlambda: parse_field(dlambda, "dlambda", &[Var::L, Var::N])?,
            dtheta: parse_field(dtheta, "dtheta", &[Var::L, Var::N])?,
            chart,
        })
    }

    pub fn degree(&self) -> u32 {
        match self {
            JumpMap::Plane { degree, .. } | JumpMap::Composed { degree, .. } => *degree,
            JumpMap::ActionAngle { chart, .. } => chart.degree(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            JumpMap::Plane { .. } => "plane_expr",
            JumpMap::ActionAngle { .. } => "action_angle",
            JumpMap::Composed { .. } => "composed",
        }
    }

    /// Image of `(x, y)`.
    pub fn apply(&self, x: f64, y: f64) -> Result<(f64, f64), JumpError> {
        match self {
            JumpMap::Plane { i, j, degree } => {
                let b = Bindings::new()
                    .with(Var::X, x)
                    .with(Var::Y, y)
                    .with(Var::N, *degree as f64);
                Ok((x + i.eval(&b)?, y + j.eval(&b)?))
            }
            JumpMap::ActionAngle {
                dlambda,
                dtheta,
                chart,
            } => {
                let aa = chart.to_action_angle(x, y)?;
                let (dl, dt) = action_angle_shift(dlambda, dtheta, chart.degree(), aa.lambda)?;
                Ok(chart.from_action_angle(&ActionAngle::new(aa.lambda + dl, aa.theta + dt))?)
            }
            JumpMap::Composed { maps, .. } => {
                maps.iter().try_fold((x, y), |(x, y), m| m.apply(x, y))
            }
        }
    }

    /// `(I, J)` at `(x, y)`.
    pub fn increments(&self, x: f64, y: f64) -> Result<(f64, f64), JumpError> {
        if let JumpMap::Plane { i, j, degree } = self {
            let b = Bindings::new()
                .with(Var::X, x)
                .with(Var::Y, y)
                .with(Var::N, *degree as f64);
            return Ok((i.eval(&b)?, j.eval(&b)?));
        }
        let (xn, yn) = self.apply(x, y)?;
        Ok((xn - x, yn - y))
    }

    /// Finite-difference steps `(hx, hy)` matched to the size of each
    /// coordinate on the energy level through `(x, y)`.
    fn steps(&self, x: f64, y: f64) -> (f64, f64) {
        let n = self.degree() as f64;
        let e = x.abs().powf(2.0 * n + 2.0) + (n + 1.0) * y * y;
        (
            FD_STEP * e.powf(1.0 / (2.0 * n + 2.0)).max(1.0),
            FD_STEP * e.sqrt().max(1.0),
        )
    }

    /// `[[∂I/∂x, ∂I/∂y], [∂J/∂x, ∂J/∂y]]` by Richardson-extrapolated central
    /// differences.
    pub fn increment_jacobian(&self, x: f64, y: f64) -> Result<Matrix2<f64>, JumpError> {
        let (hx, hy) = self.steps(x, y);
        let dx = richardson_pair(|v| self.increments(v, y), x, hx)?;
        let dy = richardson_pair(|v| self.increments(x, v), y, hy)?;
        Ok(Matrix2::new(dx.0, dy.0, dx.1, dy.1))
    }
}

fn richardson_pair(
    mut f: impl FnMut(f64) -> Result<(f64, f64), JumpError>,
    centre: f64,
    h: f64,
) -> Result<(f64, f64), JumpError> {
    let mut diff = |h: f64| -> Result<(f64, f64), JumpError> {
        let (a1, b1) = f(centre + h)?;
        let (a0, b0) = f(centre - h)?;
        Ok(((a1 - a0) / (2.0 * h), (b1 - b0) / (2.0 * h)))
    };
    let coarse = diff(h)?;
    let fine = diff(0.5 * h)?;
    Ok((
        (4.0 * fine.0 - coarse.0) / 3.0,
        (4.0 * fine.1 - coarse.1) / 3.0,
    ))
}

fn action_angle_shift(
    dlambda: &Expr,
    dtheta: &Expr,
    degree: u32,
    lambda: f64,
) -> Result<(f64, f64), EvalError> {
    let b = Bindings::new()
        .with(Var::L, lambda)
        .with(Var::N, degree as f64);
    Ok((dlambda.eval(&b)?, dtheta.eval(&b)?))
}

pub fn apply_jump(j: &JumpMap, s: &PlaneState) -> Result<PlaneState, JumpError> {
    let (x, y) = j.apply(s.x, s.y)?;
    Ok(PlaneState::new(x, y, s.t))
}

/// Derivative of the full map `(x, y) ↦ (x + I, y + J)`.
pub fn jump_jacobian(j: &JumpMap, s: &PlaneState) -> Result<Matrix2<f64>, JumpError> {
    Ok(Matrix2::identity() + j.increment_jacobian(s.x, s.y)?)
}

/// `I_x + J_y + I_x J_y − I_y J_x`, zero exactly when the jump preserves area.
pub fn condition_ii_residual(j: &JumpMap, s: &PlaneState) -> Result<f64, JumpError> {
    let d = j.increment_jacobian(s.x, s.y)?;
    let (ix, iy, jx, jy) = (d[(0, 0)], d[(0, 1)], d[(1, 0)], d[(1, 1)]);
    Ok(ix + jy + ix * jy - iy * jx)
}

/// Closed form of the twist jump `Δλ = 0`, `Δθ = λ⁻²` written directly in
/// the plane through the inverse of `x0`.
pub fn twist_closed_form(
    chart: &ActionAngleChart,
    x: f64,
    y: f64,
) -> Result<(f64, f64), ChartError> {
    let n = chart.degree() as f64;
    let t0 = chart.period();
    let c = chart.constants().c;
    let e = x.abs().powf(2.0 * n + 2.0) + (n + 1.0) * y * y;
    if e == 0.0 {
        return Err(ChartError::Origin);
    }
    let rx = e.powf(1.0 / (2.0 * n + 2.0));
    let ry = e.sqrt();
    let u = (x / rx).clamp(-1.0, 1.0);
    let s = if y < 0.0 {
        chart.orbit().invert_x0(u, Branch::Descending)?
    } else if y > 0.0 {
        chart.orbit().invert_x0(u, Branch::Ascending)?
    } else if x > 0.0 {
        0.0
    } else {
        0.5 * t0
    };
    let shifted = s + t0 * c * c / e.powf((n + 2.0) / (n + 1.0));
    let (x0, y0) = chart.orbit().eval(shifted);
    Ok((rx * x0, ry * y0))
}

/// Point `(r cos ψ, r sin ψ)` with `h0 = level`.
pub fn point_on_shell(degree: u32, level: f64, psi: f64) -> (f64, f64) {
    let (s, c) = psi.sin_cos();
    let p = 2.0 * degree as f64 + 2.0;
    let mut r = f64::INFINITY;
    if c.abs() > 1e-12 {
        r = r.min((p * level).powf(1.0 / p) / c.abs());
    }
    if s.abs() > 1e-12 {
        r = r.min((2.0 * level).sqrt() / s.abs());
    }
    // g is convex and increasing in r, so Newton from above is monotone.
    for _ in 0..200 {
        let g = (r * c).abs().powf(p) / p + 0.5 * (r * s).powi(2) - level;
        let dg = (r * c).abs().powf(p - 1.0) * c.abs() + r * s * s;
        let step = g / dg;
        r -= step;
        if step.abs() <= 1e-15 * r {
            break;
        }
    }
    (r * c, r * s)
}

fn check_grid(grid: &[f64]) -> Result<(), ScanError> {
    if grid.len() < 2 || grid[0] <= 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ScanError::BadGrid);
    }
    let decades = (grid[grid.len() - 1] / grid[0]).log10();
    if decades < MIN_DECADES - 1e-9 {
        return Err(ScanError::GridTooSmall(decades));
    }
    Ok(())
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if usable.len() < 2 {
        return None;
    }
    let m = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / m;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Geometric grid of `count` points from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count)
        .map(|k| {
            if k + 1 == count {
                hi
            } else {
                lo * (r * k as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightedTrend {
    pub component: &'static str,
    pub m1: u32,
    pub m2: u32,
    /// Largest weighted value over rays at each grid level.
    pub profile: Vec<f64>,
    pub max_weighted: f64,
    pub slope: Option<f64>,
    pub identically_zero: bool,
    pub bounded: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionIReport {
    pub eps: f64,
    pub h0_grid: Vec<f64>,
    pub rays: usize,
    pub entries: Vec<WeightedTrend>,
    pub bounded: bool,
    pub label: String,
}

/// Number of rays in the decay-condition scan.
pub const SCAN_RAYS: usize = 8;

/// Evaluates the weighted derivatives of `I` and `J` along rays through the
/// origin at each energy level of `h0_grid`.
pub fn condition_i_scan(
    j: &JumpMap,
    eps: f64,
    orders: &[(u32, u32)],
    h0_grid: &[f64],
) -> Result<ConditionIReport, ScanError> {
    check_grid(h0_grid)?;
    if let Some(&(a, b)) = orders.iter().find(|(a, b)| a + b > 1) {
        return Err(ScanError::Order(a, b));
    }
    let n = j.degree();
    let nf = n as f64;
    let points: Vec<(f64, f64, f64)> = h0_grid
        .iter()
        .flat_map(|&h| {
            (0..SCAN_RAYS).map(move |k| {
                let psi = 2.0 * std::f64::consts::PI * k as f64 / SCAN_RAYS as f64;
                let (x, y) = point_on_shell(n, h, psi);
                (h, x, y)
            })
        })
        .collect();
    let need_jacobian = orders.iter().any(|(a, b)| a + b == 1);
    let samples = points
        .par_iter()
        .map(|&(h, x, y)| -> Result<_, JumpError> {
            let inc = j.increments(x, y)?;
            let jac = if need_jacobian {
                Some(j.increment_jacobian(x, y)?)
            } else {
                None
            };
            Ok((h, inc, jac))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let base = (nf + 2.0) * eps / (2.0 * nf + 2.0);
    let mut entries = Vec::new();
    for &(m1, m2) in orders {
        for (comp, idx, lead) in [("I", 0usize, 0.5), ("J", 1usize, 1.0 / (2.0 * nf + 2.0))] {
            let w = lead + base + m1 as f64 / (2.0 * nf + 2.0) + m2 as f64 / 2.0;
            let mut profile = vec![0.0f64; h0_grid.len()];
            let mut finite = true;
            for (k, (h, inc, jac)) in samples.iter().enumerate() {
                let d = match (m1, m2) {
                    (0, 0) => [inc.0, inc.1][idx],
                    (1, 0) => jac.unwrap()[(idx, 0)],
                    _ => jac.unwrap()[(idx, 1)],
                };
                let v = (d * h.powf(w)).abs();
                finite &= v.is_finite();
                let slot = &mut profile[k / SCAN_RAYS];
                *slot = slot.max(v);
            }
            let max_weighted = profile.iter().cloned().fold(0.0, f64::max);
            let identically_zero = max_weighted == 0.0;
            let slope = if identically_zero {
                None
            } else {
                let pts: Vec<_> = h0_grid
                    .iter()
                    .cloned()
                    .zip(profile.iter().cloned())
                    .collect();
                let usable = pts.iter().filter(|p| p.1 > 0.0).count();
                if usable < 3 {
                    return Err(ScanError::DegenerateFit {
                        quantity: format!("{comp}({m1},{m2})"),
                        usable,
                    });
                }
                log_log_slope(&pts)
            };
            let bounded = finite && (identically_zero || slope.is_some_and(|s| s <= TREND_TOL));
            entries.push(WeightedTrend {
                component: comp,
                m1,
                m2,
                profile,
                max_weighted,
                slope,
                identically_zero,
                bounded,
            });
        }
    }
    let bounded = entries.iter().all(|e| e.bounded);
    let (lo, hi) = (h0_grid[0], h0_grid[h0_grid.len() - 1]);
    let label = if bounded {
        format!("corroborated on [{lo:e}, {hi:e}]")
    } else {
        format!("violated on [{lo:e}, {hi:e}]")
    };
    Ok(ConditionIReport {
        eps,
        h0_grid: h0_grid.to_vec(),
        rays: SCAN_RAYS,
        entries,
        bounded,
        label,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayEntry {
    pub quantity: &'static str,
    pub slope: Option<f64>,
    pub required: f64,
    pub identically_zero: bool,
    pub satisfied: bool,
    /// `max_θ |·|` at each λ of the grid.
    pub profile: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub eps: f64,
    pub lambda_grid: Vec<f64>,
    pub entries: Vec<DecayEntry>,
    pub satisfied: bool,
}

impl DecayReport {
    pub fn entry(&self, quantity: &str) -> Option<&DecayEntry> {
        self.entries.iter().find(|e| e.quantity == quantity)
    }
}

fn wrap_half(v: f64) -> f64 {
    let w = v - v.round();
    if w <= -0.5 {
        w + 1.0
    } else {
        w
    }
}

/// `(Δλ, Δθ)` of `j` at `(λ, θ)`, with `Δθ` reduced to `(−½, ½]` for maps not
/// given in action-angle form.
fn aa_increments(
    j: &JumpMap,
    chart: &ActionAngleChart,
    lambda: f64,
    theta: f64,
) -> Result<(f64, f64), JumpError> {
    if let JumpMap::ActionAngle {
        dlambda, dtheta, ..
    } = j
    {
        return Ok(action_angle_shift(dlambda, dtheta, chart.degree(), lambda)?);
    }
    let (x, y) = chart.from_action_angle(&ActionAngle::new(lambda, theta))?;
    let (xn, yn) = j.apply(x, y)?;
    let aa = chart.to_action_angle(xn, yn)?;
    Ok((aa.lambda - lambda, wrap_half(aa.theta - theta)))
}

/// Fits the decay of `Δλ`, `Δθ` and their λ-derivatives against λ.
pub fn action_angle_decay_slopes(
    j: &JumpMap,
    chart: &ActionAngleChart,
    eps: f64,
    lambda_grid: &[f64],
    theta_grid: &[f64],
) -> Result<DecayReport, ScanError> {
    check_grid(lambda_grid)?;
    if theta_grid.is_empty() {
        return Err(ScanError::BadGrid);
    }
    let points: Vec<(f64, f64)> = lambda_grid
        .iter()
        .flat_map(|&l| theta_grid.iter().map(move |&t| (l, t)))
        .collect();
    let values = points
        .par_iter()
        .map(|&(l, t)| -> Result<[f64; 4], JumpError> {
            let (dl, dt) = aa_increments(j, chart, l, t)?;
            let (dl_l, dt_l) = richardson_pair(|v| aa_increments(j, chart, v, t), l, FD_STEP * l)?;
            Ok([dl, dt, dl_l, dt_l])
        })
        .collect::<Result<Vec<_>, _>>()?;

    let specs = [
        ("dlambda", -eps),
        ("dtheta", -1.0 - eps),
        ("d_dlambda_dl", -1.0 - eps),
        ("d_dtheta_dl", -2.0 - eps),
    ];
    let m = theta_grid.len();
    let mut entries = Vec::new();
    for (q, (name, required)) in specs.into_iter().enumerate() {
        let profile: Vec<f64> = (0..lambda_grid.len())
            .map(|i| {
                values[i * m..(i + 1) * m]
                    .iter()
                    .map(|v| v[q].abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let identically_zero = profile
            .iter()
            .zip(lambda_grid)
            .all(|(v, l)| *v <= ZERO_TOL * l.max(1.0));
        let slope = if identically_zero {
            None
        } else {
            let pts: Vec<_> = lambda_grid
                .iter()
                .cloned()
                .zip(profile.iter().cloned())
                .collect();
            let usable = pts.iter().filter(|p| p.1 > 0.0 && p.1.is_finite()).count();
            if usable < MIN_FIT_POINTS {
                return Err(ScanError::DegenerateFit {
                    quantity: name.to_string(),
                    usable,
                });
            }
            log_log_slope(&pts)
        };
        let satisfied = identically_zero || slope.is_some_and(|s| s <= required);
        entries.push(DecayEntry {
            quantity: name,
            slope,
            required,
            identically_zero,
            satisfied,
            profile,
        });
    }
    let satisfied = entries.iter().all(|e| e.satisfied);
    Ok(DecayReport {
        eps,
        lambda_grid: lambda_grid.to_vec(),
        entries,
        satisfied,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualSample {
    pub h0: f64,
    pub x: f64,
    pub y: f64,
    pub residual: f64,
}

/// Outcome of both jump conditions for one jump map.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub kind: &'static str,
    pub residual_grid: Vec<ResidualSample>,
    pub max_abs_residual: f64,
    pub area_condition: bool,
    pub decay_condition: ConditionIReport,
    pub action_angle_decay: DecayReport,
    pub passed: bool,
}

/// Grid choices used by [`verify_jump`].
#[derive(Debug, Clone)]
pub struct VerifyGrid {
    pub residual_levels: Vec<f64>,
    pub residual_phases: usize,
    pub scan_levels: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
}

impl Default for VerifyGrid {
    fn default() -> Self {
        VerifyGrid {
            residual_levels: geometric_grid(10.0, 1e4, 10),
            residual_phases: 10,
            scan_levels: geometric_grid(10.0, 1e4, 13),
            lambda_grid: geometric_grid(10.0, 1e4, 13),
            theta_grid: (0..16).map(|k| k as f64 / 16.0).collect(),
        }
    }
}

pub fn residual_grid(
    j: &JumpMap,
    levels: &[f64],
    phases: usize,
) -> Result<Vec<ResidualSample>, JumpError> {
    let n = j.degree();
    let points: Vec<(f64, f64, f64)> = levels
        .iter()
        .flat_map(|&h| {
            (0..phases).map(move |k| {
                let psi = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / phases as f64;
                let (x, y) = point_on_shell(n, h, psi);
                (h, x, y)
            })
        })
        .collect();
    points
        .par_iter()
        .map(|&(h, x, y)| {
            let residual = condition_ii_residual(j, &PlaneState::new(x, y, 0.0))?;
            Ok(ResidualSample {
                h0: h,
                x,
                y,
                residual,
            })
        })
        .collect()
}

/// Runs the area check, the weighted decay scan and the action-angle decay
/// fit on `j`.
pub fn verify_jump(
    j: &JumpMap,
    chart: &ActionAngleChart,
    eps: f64,
    grid: &VerifyGrid,
) -> Result<ConditionReport, ScanError> {
    let residual_grid = residual_grid(j, &grid.residual_levels, grid.residual_phases)?;
    let max_abs_residual = residual_grid
        .iter()
        .map(|r| r.residual.abs())
        .fold(0.0, f64::max);
    let area_condition = max_abs_residual <= RESIDUAL_TOL;
    let decay_condition = condition_i_scan(j, eps, &[(0, 0), (1, 0), (0, 1)], &grid.scan_levels)?;
    let action_angle_decay =
        action_angle_decay_slopes(j, chart, eps, &grid.lambda_grid, &grid.theta_grid)?;
    let passed = area_condition && decay_condition.bounded && action_angle_decay.satisfied;
    Ok(ConditionReport {
        kind: j.kind(),
        residual_grid,
        max_abs_residual,
        area_condition,
        decay_condition,
        action_angle_decay,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::h0;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chart(n: u32) -> Arc<ActionAngleChart> {
        Arc::new(ActionAngleChart::new(n).unwrap())
    }

    fn twist(n: u32) -> (JumpMap, Arc<ActionAngleChart>) {
        let ch = chart(n);
        (
            JumpMap::action_angle("0", "1/l^2", Arc::clone(&ch)).unwrap(),
            ch,
        )
    }

    fn at(x: f64, y: f64) -> PlaneState {
        PlaneState::new(x, y, 0.0)
    }

    #[test]
    fn zero_map_is_identity() {
        let j = JumpMap::plane("0", "0", 1).unwrap();
        assert_eq!(apply_jump(&j, &at(1.5, -2.0)).unwrap(), at(1.5, -2.0));
        assert_eq!(
            jump_jacobian(&j, &at(1.5, -2.0)).unwrap(),
            Matrix2::identity()
        );
        assert_eq!(condition_ii_residual(&j, &at(3.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn linear_dilation() {
        let j = JumpMap::plane("0.1*x", "0", 1).unwrap();
        for &(x, y) in &[(1.0, 0.0), (-3.0, 7.0), (20.0, -0.5)] {
            let m = jump_jacobian(&j, &at(x, y)).unwrap();
            assert!((m[(0, 0)] - 1.1).abs() < 1e-10 && m[(0, 1)].abs() < 1e-10);
            assert!(m[(1, 0)].abs() < 1e-10 && (m[(1, 1)] - 1.0).abs() < 1e-10);
            assert!((m.determinant() - 1.1).abs() < 1e-10);
            assert!((condition_ii_residual(&j, &at(x, y)).unwrap() - 0.1).abs() < 1e-10);
        }
    }

    #[test]
    fn twist_at_the_right_turning_point() {
        let (j, ch) = twist(1);
        let c = ch.constants().c;
        let out = apply_jump(&j, &at(1.0, 0.0)).unwrap();
        let want = ch
            .from_action_angle(&ActionAngle::new(1.0 / c, c * c))
            .unwrap();
        assert!((out.x - want.0).abs() < 1e-12 && (out.y - want.1).abs() < 1e-12);
    }

    #[test]
    fn twist_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=2 {
            let (j, ch) = twist(n);
            for _ in 0..50 {
                let x: f64 = rng.gen_range(-5.0..5.0);
                let y: f64 = rng.gen_range(-5.0..5.0);
                let (a, b) = j.apply(x, y).unwrap();
                let (p, q) = twist_closed_form(&ch, x, y).unwrap();
                let scale = 1.0 + x.abs() + y.abs();
                assert!((a - p).abs() < 1e-9 * scale && (b - q).abs() < 1e-9 * scale);
            }
        }
    }

    #[test]
    fn twist_preserves_area() {
        let (j, _) = twist(1);
        let samples = residual_grid(&j, &geometric_grid(10.0, 1e4, 10), 10).unwrap();
        assert_eq!(samples.len(), 100);
        for s in samples {
            assert!(s.residual.abs() < 1e-6, "{s:?}");
            let det = jump_jacobian(&j, &at(s.x, s.y)).unwrap().determinant();
            assert!((det - 1.0 - s.residual).abs() < 1e-8);
        }
    }

    #[test]
    fn conjugation_consistency() {
        let (j, ch) = twist(1);
        for &(x, y) in &[(2.0, 0.3), (-1.0, -4.0), (0.2, 9.0)] {
            let before = ch.to_action_angle(x, y).unwrap();
            let (a, b) = j.apply(x, y).unwrap();
            let after = ch.to_action_angle(a, b).unwrap();
            assert!((after.lambda - before.lambda).abs() < 1e-9 * before.lambda);
            let want = before.theta + before.lambda.powi(-2);
            assert!(wrap_half(after.theta - want).abs() < 1e-9);
        }
    }

    #[test]
    fn shell_points_have_the_requested_energy() {
        for n in 1..=3 {
            for &level in &[0.5, 10.0, 1e4] {
                for k in 0..8 {
                    let (x, y) = point_on_shell(n, level, k as f64 * 0.7);
                    assert!((h0(n, x, y) - level).abs() < 1e-12 * level);
                }
            }
        }
    }

    #[test]
    fn condition_i_examples() {
        let grid = geometric_grid(10.0, 1e4, 10);
        let zero = JumpMap::plane("0", "0", 1).unwrap();
        let r = condition_i_scan(&zero, 0.3, &[(0, 0), (1, 0), (0, 1)], &grid).unwrap();
        assert!(r.bounded && r.entries.iter().all(|e| e.identically_zero));

        let (j, _) = twist(1);
        let r = condition_i_scan(&j, 0.5, &[(0, 0), (1, 0), (0, 1)], &grid).unwrap();
        assert!(r.bounded, "{:#?}", r.entries);
        assert!(r.label.starts_with("corroborated"));

        let grow = JumpMap::plane("x", "0", 1).unwrap();
        let r = condition_i_scan(&grow, 0.1, &[(0, 0)], &grid).unwrap();
        assert!(!r.bounded);

        let short = geometric_grid(10.0, 1e2, 5);
        assert!(matches!(
            condition_i_scan(&zero, 0.1, &[(0, 0)], &short),
            Err(ScanError::GridTooSmall(_))
        ));
        assert!(matches!(
            condition_i_scan(&zero, 0.1, &[(1, 1)], &grid),
            Err(ScanError::Order(1, 1))
        ));
    }

    #[test]
    fn decay_slopes_of_power_laws() {
        let ch = chart(1);
        let lg = geometric_grid(10.0, 1e4, 13);
        let tg: Vec<f64> = (0..8).map(|k| k as f64 / 8.0).collect();
        let (j, _) = twist(1);
        let r = action_angle_decay_slopes(&j, &ch, 0.5, &lg, &tg).unwrap();
        assert!(r.entry("dlambda").unwrap().identically_zero);
        assert!((r.entry("dtheta").unwrap().slope.unwrap() + 2.0).abs() < 0.01);
        assert!((r.entry("d_dtheta_dl").unwrap().slope.unwrap() + 3.0).abs() < 0.01);
        assert!(r.satisfied);

        let cube = JumpMap::action_angle("0", "1/l^3", Arc::clone(&ch)).unwrap();
        let r = action_angle_decay_slopes(&cube, &ch, 0.5, &lg, &tg).unwrap();
        assert!((r.entry("dtheta").unwrap().slope.unwrap() + 3.0).abs() < 0.01);

        let dil = JumpMap::plane("0.1*x", "0", 1).unwrap();
        let r = action_angle_decay_slopes(&dil, &ch, 0.5, &lg, &tg).unwrap();
        let s = r.entry("dlambda").unwrap().slope.unwrap();
        assert!((s - 1.0).abs() < 0.05, "{s}");
        assert!(!r.satisfied);
    }

    #[test]
    fn decay_fit_needs_enough_points() {
        let ch = chart(1);
        let j = JumpMap::action_angle("0", "1/l^2", Arc::clone(&ch)).unwrap();
        let lg = [1.0, 1e3, 1e4];
        let err = action_angle_decay_slopes(&j, &ch, 0.5, &lg, &[0.0]).unwrap_err();
        assert!(matches!(err, ScanError::DegenerateFit { usable: 3, .. }));
    }

    #[test]
    fn verify_examples() {
        let (j, ch) = twist(1);
        let r = verify_jump(&j, &ch, 0.5, &VerifyGrid::default()).unwrap();
        assert!(r.passed, "{r:#?}");
        let dil = JumpMap::plane("0.1*x", "0", 1).unwrap();
        let r = verify_jump(&dil, &ch, 0.5, &VerifyGrid::default()).unwrap();
        assert!(!r.passed);
        assert!((r.max_abs_residual - 0.1).abs() < 1e-9);
    }

    #[test]
    fn composed_applies_in_order() {
        let ch = chart(1);
        let spec = JumpSpec::Composed {
            maps: vec![
                JumpSpec::PlaneExpr {
                    i: "1".into(),
                    j: "0".into(),
                },
                JumpSpec::PlaneExpr {
                    i: "0".into(),
                    j: "x".into(),
                },
            ],
        };
        let j = JumpMap::from_spec(&spec, &ch).unwrap();
        assert_eq!(j.apply(2.0, 0.0).unwrap(), (3.0, 3.0));
    }

    #[test]
    fn origin_is_rejected_by_action_angle_jumps() {
        let (j, _) = twist(1);
        assert!(matches!(
            j.apply(0.0, 0.0),
            Err(JumpError::Chart(ChartError::Origin))
        ));
    }

    #[test]
    fn bad_variables_are_rejected() {
        assert!(matches!(
            JumpMap::plane("l", "0", 1),
            Err(ModelError::Expression { .. })
        ));
        assert!(JumpMap::action_angle("x", "0", chart(1)).is_err());
    }
}
