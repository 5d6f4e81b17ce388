//! Smooth flow between impulse times, the time-1 map and its Jacobian, and
//! orbit iteration with a continuous angle lift.

mod dop853;
mod tableau;

use nalgebra::Matrix2;
use serde::Serialize;
use thiserror::Error;

pub use dop853::{solve, DenseStep, IntegrationError, IntegratorSettings, Stats};

use crate::action_angle::ActionAngleChart;
use crate::expr::EvalError;
use crate::impulse::{jump_jacobian, JumpError};
use crate::model::{PlaneState, System};

/// Integration aborts once `|x| + |y|` exceeds this.
pub const ESCAPE_NORM: f64 = 1e12;
/// Minimum number of sub-samples per period used for the angle lift.
pub const MIN_SUBSAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("vector field failed at t={t}: {source}")]
    Eval { t: f64, source: EvalError },
    #[error("step size underflow at t={0}")]
    StepTooSmall(f64),
    #[error("non-finite state at t={0}")]
    NonFinite(f64),
    #[error("blow-up at t={0}: |x|+|y| exceeded {ESCAPE_NORM:e}")]
    Escaped(f64),
    #[error("step budget exhausted at t={0}")]
    TooManySteps(f64),
    #[error("jump {index} at t={t} failed: {source}")]
    Jump {
        index: usize,
        t: f64,
        source: JumpError,
    },
}

impl FlowError {
    /// True for solutions that left every bounded region.
    pub fn is_blow_up(&self) -> bool {
        matches!(self, FlowError::Escaped(_) | FlowError::NonFinite(_))
    }
}

impl From<IntegrationError<EvalError>> for FlowError {
    fn from(e: IntegrationError<EvalError>) -> Self {
        match e {
            IntegrationError::Rhs { t, source } => FlowError::Eval { t, source },
            IntegrationError::StepTooSmall(t) => FlowError::StepTooSmall(t),
            IntegrationError::NonFinite(t) => FlowError::NonFinite(t),
            IntegrationError::Escaped(t) => FlowError::Escaped(t),
            IntegrationError::TooManySteps(t) => FlowError::TooManySteps(t),
        }
    }
}

/// Returns `(y, -x^(2n+1) - Σ p_i x^i, ∂ẏ/∂x)`.
fn field(sys: &System, t: f64, x: f64, y: f64) -> Result<(f64, f64, f64), EvalError> {
    let (p, dp) = sys.forcing(t, x)?;
    let k = 2 * sys.degree() as i32 + 1;
    let xk = x.powi(k - 1);
    Ok((y, -xk * x - p, -(k as f64) * xk - dp))
}

fn escaped<const N: usize>(s: &[f64; N]) -> bool {
    s[0].abs() + s[1].abs() > ESCAPE_NORM
}

fn plane_flow(
    sys: &System,
    s: &PlaneState,
    t1: f64,
    settings: &IntegratorSettings,
    observer: Option<&mut dyn FnMut(&DenseStep<2>) -> Result<(), EvalError>>,
) -> Result<PlaneState, FlowError> {
    let mut rhs = |t: f64, u: &[f64; 2]| -> Result<[f64; 2], EvalError> {
        let (dx, dy, _) = field(sys, t, u[0], u[1])?;
        Ok([dx, dy])
    };
    let (u, _) = solve(&mut rhs, s.t, [s.x, s.y], t1, settings, escaped, observer)?;
    Ok(PlaneState::new(u[0], u[1], t1))
}

fn variational_flow(
    sys: &System,
    s: &PlaneState,
    t1: f64,
    settings: &IntegratorSettings,
) -> Result<(PlaneState, Matrix2<f64>), FlowError> {
    // state: x, y, then the columns of M
    let mut rhs = |t: f64, u: &[f64; 6]| -> Result<[f64; 6], EvalError> {
        let (dx, dy, a) = field(sys, t, u[0], u[1])?;
        Ok([dx, dy, u[3], a * u[2], u[5], a * u[4]])
    };
    let u0 = [s.x, s.y, 1.0, 0.0, 0.0, 1.0];
    let (u, _) = solve(&mut rhs, s.t, u0, t1, settings, escaped, None)?;
    Ok((
        PlaneState::new(u[0], u[1], t1),
        Matrix2::new(u[2], u[4], u[3], u[5]),
    ))
}

/// Integrates the smooth equation from `s.t` to `t1`, optionally together
/// with the variational equation `M' = DF·M`, `M(s.t) = I`.
///
/// The caller is responsible for splitting at impulse times. Backward
/// integration (`t1 < s.t`) is allowed.
pub fn integrate_smooth(
    sys: &System,
    s: &PlaneState,
    t1: f64,
    settings: &IntegratorSettings,
    with_variational: bool,
) -> Result<(PlaneState, Option<Matrix2<f64>>), FlowError> {
    if with_variational {
        let (u, m) = variational_flow(sys, s, t1, settings)?;
        Ok((u, Some(m)))
    } else {
        Ok((plane_flow(sys, s, t1, settings, None)?, None))
    }
}

/// One piece of the time-1 map: a flow segment or a jump.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub t_start: f64,
    pub t_end: f64,
    pub state_in: PlaneState,
    pub state_out: PlaneState,
    pub jump: Option<usize>,
    /// Derivative of the piece; present when the Jacobian was requested.
    pub monodromy: Option<Matrix2<f64>>,
}

enum PeriodEvent<'a> {
    Step(&'a DenseStep<2>),
    Jump { t: f64, after: PlaneState },
}

fn run_period(
    sys: &System,
    u0: &PlaneState,
    settings: &IntegratorSettings,
    variational: bool,
    mut sampler: Option<&mut dyn FnMut(PeriodEvent<'_>)>,
) -> Result<(PlaneState, Vec<SegmentRecord>), FlowError> {
    let base = u0.t;
    let mut segments = Vec::with_capacity(2 * sys.impulses().len() + 1);
    let mut cur = *u0;
    let flow_to = |cur: &PlaneState,
                   t1: f64,
                   sampler: &mut Option<&mut dyn FnMut(PeriodEvent<'_>)>|
     -> Result<SegmentRecord, FlowError> {
        let (out, m) = if variational {
            let (out, m) = variational_flow(sys, cur, t1, settings)?;
            (out, Some(m))
        } else if let Some(sample) = sampler.as_deref_mut() {
            let mut obs = |d: &DenseStep<2>| -> Result<(), EvalError> {
                sample(PeriodEvent::Step(d));
                Ok(())
            };
            (plane_flow(sys, cur, t1, settings, Some(&mut obs))?, None)
        } else {
            (plane_flow(sys, cur, t1, settings, None)?, None)
        };
        Ok(SegmentRecord {
            t_start: cur.t,
            t_end: t1,
            state_in: *cur,
            state_out: out,
            jump: None,
            monodromy: m,
        })
    };
    for (index, imp) in sys.impulses().iter().enumerate() {
        let tj = base + imp.time;
        let seg = flow_to(&cur, tj, &mut sampler)?;
        cur = seg.state_out;
        segments.push(seg);
        let fail = |source| FlowError::Jump {
            index,
            t: tj,
            source,
        };
        let (x, y) = imp.map.apply(cur.x, cur.y).map_err(fail)?;
        let after = PlaneState::new(x, y, tj);
        if !after.is_finite() {
            return Err(FlowError::NonFinite(tj));
        }
        if x.abs() + y.abs() > ESCAPE_NORM {
            return Err(FlowError::Escaped(tj));
        }
        let m = if variational {
            Some(jump_jacobian(&imp.map, &cur).map_err(fail)?)
        } else {
            None
        };
        if let Some(sample) = sampler.as_deref_mut() {
            sample(PeriodEvent::Jump { t: tj, after });
        }
        segments.push(SegmentRecord {
            t_start: tj,
            t_end: tj,
            state_in: cur,
            state_out: after,
            jump: Some(index),
            monodromy: m,
        });
        cur = after;
    }
    let seg = flow_to(&cur, base + 1.0, &mut sampler)?;
    cur = seg.state_out;
    segments.push(seg);
    Ok((cur, segments))
}

/// The time-1 map from `u0` (at the start of a period, `u0.t` an integer)
/// with its segments in order.
pub fn poincare_map(
    sys: &System,
    u0: &PlaneState,
    settings: &IntegratorSettings,
) -> Result<(PlaneState, Vec<SegmentRecord>), FlowError> {
    run_period(sys, u0, settings, false, None)
}

/// Jacobian of the time-1 map: flow monodromies and jump Jacobians multiplied
/// in composition order.
pub fn poincare_jacobian(
    sys: &System,
    u0: &PlaneState,
    settings: &IntegratorSettings,
) -> Result<Matrix2<f64>, FlowError> {
    let (_, segments) = run_period(sys, u0, settings, true, None)?;
    Ok(segments.iter().fold(Matrix2::identity(), |acc, s| {
        s.monodromy.expect("variational run records every factor") * acc
    }))
}

fn wrap_half(v: f64) -> f64 {
    v - v.round()
}

/// Continuous lift of the angle along a sampled trajectory.
struct LiftTracker<'a> {
    chart: &'a ActionAngleChart,
    t: f64,
    lambda: f64,
    theta: f64,
    lift: f64,
    valid: bool,
}

impl<'a> LiftTracker<'a> {
    fn new(chart: &'a ActionAngleChart, s: &PlaneState) -> Self {
        match chart.to_action_angle(s.x, s.y) {
            Ok(aa) => LiftTracker {
                chart,
                t: s.t,
                lambda: aa.lambda,
                theta: aa.theta,
                lift: aa.theta,
                valid: true,
            },
            Err(_) => LiftTracker {
                chart,
                t: s.t,
                lambda: f64::NAN,
                theta: f64::NAN,
                lift: f64::NAN,
                valid: false,
            },
        }
    }

    /// Advances by the increment congruent to the observed angle change that
    /// is nearest to the unperturbed prediction.
    fn push(&mut self, t: f64, x: f64, y: f64) {
        if !self.valid {
            return;
        }
        match self.chart.to_action_angle(x, y) {
            Ok(aa) => {
                let pred = self.chart.frequency(self.lambda) * (t - self.t);
                self.lift += pred + wrap_half(aa.theta - self.theta - pred);
                self.t = t;
                self.lambda = aa.lambda;
                self.theta = aa.theta;
            }
            Err(_) => {
                self.valid = false;
                self.lambda = f64::NAN;
                self.lift = f64::NAN;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitSample {
    pub period: usize,
    pub x: f64,
    pub y: f64,
    pub h0: f64,
    pub lambda: f64,
    pub theta_lift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OrbitStatus {
    Completed,
    /// Blow-up during the given (1-based) period.
    Escaped {
        period: usize,
        t: f64,
    },
    /// `h0` exceeded the configured multiple of its initial value.
    Capped {
        period: usize,
    },
    Failed {
        period: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitRecord {
    pub initial: PlaneState,
    pub requested: usize,
    /// Period-boundary samples, starting with the initial state.
    pub samples: Vec<OrbitSample>,
    pub status: OrbitStatus,
    pub periods_completed: usize,
    pub min_h0: f64,
    pub max_h0: f64,
    pub max_norm: f64,
    /// False once the orbit touched the origin, where the angle is undefined.
    pub lift_valid: bool,
}

#[derive(Debug, Clone, Default)]
pub struct OrbitOptions {
    /// Stop once `h0 / h0(initial)` exceeds this.
    pub h0_cap: Option<f64>,
}

/// Applies the time-1 map `n` times.
pub fn iterate_map(
    sys: &System,
    u0: &PlaneState,
    n: usize,
    settings: &IntegratorSettings,
) -> OrbitRecord {
    iterate_map_with(sys, u0, n, settings, &OrbitOptions::default())
}

pub fn iterate_map_with(
    sys: &System,
    u0: &PlaneState,
    n: usize,
    settings: &IntegratorSettings,
    options: &OrbitOptions,
) -> OrbitRecord {
    let chart = sys.chart();
    let h_init = sys.h0(u0.x, u0.y);
    let mut tracker = LiftTracker::new(chart, u0);
    let mut samples = Vec::with_capacity(n + 1);
    samples.push(OrbitSample {
        period: 0,
        x: u0.x,
        y: u0.y,
        h0: h_init,
        lambda: tracker.lambda,
        theta_lift: tracker.lift,
    });
    let mut min_h0 = h_init;
    let mut max_h0 = h_init;
    let mut max_norm = u0.x.abs() + u0.y.abs();
    let mut status = OrbitStatus::Completed;
    let mut cur = *u0;

    for k in 1..=n {
        let base = cur.t;
        let omega = if tracker.valid {
            chart.frequency(tracker.lambda)
        } else {
            0.0
        };
        let n_sub = MIN_SUBSAMPLES.max((4.0 * omega).ceil() as usize);
        let mut next = 1usize;
        let mut observe = |t: f64, x: f64, y: f64, tracker: &mut LiftTracker| {
            let h = sys.h0(x, y);
            min_h0 = min_h0.min(h);
            max_h0 = max_h0.max(h);
            max_norm = max_norm.max(x.abs() + y.abs());
            tracker.push(t, x, y);
        };
        let mut sampler = |ev: PeriodEvent<'_>| match ev {
            PeriodEvent::Step(d) => {
                while next < n_sub {
                    let t = base + next as f64 / n_sub as f64;
                    if t > d.t_end() {
                        break;
                    }
                    let u = d.eval(t);
                    observe(t, u[0], u[1], &mut tracker);
                    next += 1;
                }
            }
            PeriodEvent::Jump { t, after } => observe(t, after.x, after.y, &mut tracker),
        };
        match run_period(sys, &cur, settings, false, Some(&mut sampler)) {
            Ok((u1, _)) => {
                let u1 = PlaneState::new(u1.x, u1.y, base + 1.0);
                observe(u1.t, u1.x, u1.y, &mut tracker);
                cur = u1;
                samples.push(OrbitSample {
                    period: k,
                    x: u1.x,
                    y: u1.y,
                    h0: sys.h0(u1.x, u1.y),
                    lambda: tracker.lambda,
                    theta_lift: tracker.lift,
                });
            }
            Err(e) => {
                status = match e {
                    FlowError::Escaped(t) | FlowError::NonFinite(t) => {
                        max_norm = max_norm.max(ESCAPE_NORM);
                        OrbitStatus::Escaped { period: k, t }
                    }
                    other => OrbitStatus::Failed {
                        period: k,
                        message: other.to_string(),
                    },
                };
                break;
            }
        }
        if let Some(cap) = options.h0_cap {
            if h_init > 0.0 && max_h0 / h_init > cap {
                status = OrbitStatus::Capped { period: k };
                break;
            }
        }
    }
    OrbitRecord {
        initial: *u0,
        requested: n,
        periods_completed: samples.len() - 1,
        samples,
        status,
        min_h0,
        max_h0,
        max_norm,
        lift_valid: tracker.valid,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Flow,
    JumpLeft,
    JumpRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub h0: f64,
    pub kind: RowKind,
    pub jump: Option<usize>,
}

/// Dense trajectory from `u0` to `t_end`, sampled `per_unit` times per unit
/// time, with left and right limits at each impulse. On failure the rows
/// computed so far are returned with the error.
pub fn trajectory(
    sys: &System,
    u0: &PlaneState,
    t_end: f64,
    per_unit: usize,
    settings: &IntegratorSettings,
) -> (Vec<TrajectoryRow>, Option<FlowError>) {
    let row = |s: &PlaneState, kind, jump| TrajectoryRow {
        t: s.t,
        x: s.x,
        y: s.y,
        h0: sys.h0(s.x, s.y),
        kind,
        jump,
    };
    let mut rows = vec![row(u0, RowKind::Flow, None)];
    let mut events = Vec::new();
    let mut k = u0.t.floor();
    while k < t_end {
        for (j, imp) in sys.impulses().iter().enumerate() {
            let tau = k + imp.time;
            if tau >= u0.t && tau < t_end {
                events.push((tau, j));
            }
        }
        k += 1.0;
    }
    let grid = |m: usize| u0.t + m as f64 / per_unit as f64;
    let mut next = 1usize;
    let mut cur = *u0;

    let run = |cur: &PlaneState,
               t1: f64,
               next: &mut usize,
               rows: &mut Vec<TrajectoryRow>|
     -> Result<PlaneState, FlowError> {
        let mut obs = |d: &DenseStep<2>| -> Result<(), EvalError> {
            loop {
                let t = grid(*next);
                if t >= t1 || t > d.t_end() {
                    break;
                }
                let u = d.eval(t);
                rows.push(row(&PlaneState::new(u[0], u[1], t), RowKind::Flow, None));
                *next += 1;
            }
            Ok(())
        };
        plane_flow(sys, cur, t1, settings, Some(&mut obs))
    };

    for (tau, j) in events {
        match run(&cur, tau, &mut next, &mut rows) {
            Ok(s) => cur = s,
            Err(e) => return (rows, Some(e)),
        }
        rows.push(row(&cur, RowKind::JumpLeft, Some(j)));
        match sys.impulses()[j].map.apply(cur.x, cur.y) {
            Ok((x, y)) => cur = PlaneState::new(x, y, tau),
            Err(source) => {
                return (
                    rows,
                    Some(FlowError::Jump {
                        index: j,
                        t: tau,
                        source,
                    }),
                )
            }
        }
        rows.push(row(&cur, RowKind::JumpRight, Some(j)));
        while grid(next) <= tau {
            next += 1;
        }
    }
    if t_end > cur.t {
        match run(&cur, t_end, &mut next, &mut rows) {
            Ok(s) => cur = s,
            Err(e) => return (rows, Some(e)),
        }
        rows.push(row(&cur, RowKind::Flow, None));
    }
    (rows, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impulse::{apply_jump, point_on_shell};
    use crate::model::{preset, ConfigDocument};

    fn unperturbed(n: u32) -> System {
        System::from_preset(&format!("unperturbed-n{n}")).unwrap()
    }

    fn with_impulse(coeff: &str, kind: &str) -> System {
        let text =
            format!("n = 1\ncoeffs = [\"{coeff}\", \"0\", \"0\"]\n[[impulses]]\nt = 0.5\n{kind}\n");
        System::build(&ConfigDocument::from_toml(&text).unwrap()).unwrap()
    }

    fn settings() -> IntegratorSettings {
        IntegratorSettings::default()
    }

    #[test]
    fn zero_width_interval() {
        let sys = unperturbed(1);
        let s = PlaneState::new(0.3, -0.2, 0.4);
        let (u, m) = integrate_smooth(&sys, &s, 0.4, &settings(), true).unwrap();
        assert_eq!(u, s);
        assert_eq!(m.unwrap(), Matrix2::identity());
    }

    #[test]
    fn one_reference_period_returns_home() {
        let sys = unperturbed(1);
        let t0 = sys.chart().period();
        let (u, _) = integrate_smooth(
            &sys,
            &PlaneState::new(1.0, 0.0, 0.0),
            t0,
            &settings(),
            false,
        )
        .unwrap();
        assert!((u.x - 1.0).abs() < 1e-9 && u.y.abs() < 1e-9, "{u:?}");
    }

    #[test]
    fn energy_is_conserved_over_a_hundred_periods() {
        let sys = unperturbed(1);
        let t0 = sys.chart().period();
        let s = PlaneState::new(1.0, 0.0, 0.0);
        let (u, _) =
            integrate_smooth(&sys, &s, 100.0 * t0, &IntegratorSettings::precise(), false).unwrap();
        let h = sys.h0(1.0, 0.0);
        assert!(
            (sys.h0(u.x, u.y) - h).abs() <= 1e-9 * h,
            "{}",
            sys.h0(u.x, u.y) - h
        );
    }

    #[test]
    fn reversibility() {
        let sys = unperturbed(1);
        let s = PlaneState::new(0.7, 1.3, 0.0);
        let (u, _) = integrate_smooth(&sys, &s, 1.0, &settings(), false).unwrap();
        let (back, _) = integrate_smooth(&sys, &u, 0.0, &settings(), false).unwrap();
        assert!((back.x - s.x).abs() < 1e-9 && (back.y - s.y).abs() < 1e-9);
    }

    #[test]
    fn time_one_map_without_impulses_is_the_flow() {
        let sys = unperturbed(1);
        let s = PlaneState::new(1.0, 0.0, 0.0);
        let (u, segs) = poincare_map(&sys, &s, &settings()).unwrap();
        let (v, _) = integrate_smooth(&sys, &s, 1.0, &settings(), false).unwrap();
        assert_eq!(segs.len(), 1);
        assert!((u.x - v.x).abs() < 1e-12 && (u.y - v.y).abs() < 1e-12);
    }

    #[test]
    fn identity_jump_changes_nothing() {
        let plain = unperturbed(1);
        let zero = with_impulse("0", "kind = \"plane_expr\"\nI = \"0\"\nJ = \"0\"");
        let s = PlaneState::new(1.2, -0.4, 0.0);
        let (a, _) = poincare_map(&plain, &s, &settings()).unwrap();
        let (b, segs) = poincare_map(&zero, &s, &settings()).unwrap();
        assert_eq!(segs.len(), 3);
        assert_eq!(segs[1].t_start, 0.5);
        assert_eq!(segs[1].t_end, 0.5);
        assert!((a.x - b.x).abs() < 1e-11 && (a.y - b.y).abs() < 1e-11);
    }

    #[test]
    fn segments_compose_to_the_map() {
        let sys = System::build(&preset("paper-n1").unwrap()).unwrap();
        let s = PlaneState::new(2.0, 1.0, 0.0);
        let (u, segs) = poincare_map(&sys, &s, &settings()).unwrap();
        let mut cur = s;
        for seg in &segs {
            assert_eq!(seg.state_in, cur);
            cur = match seg.jump {
                Some(j) => apply_jump(&sys.impulses()[j].map, &cur).unwrap(),
                None => {
                    integrate_smooth(&sys, &cur, seg.t_end, &settings(), false)
                        .unwrap()
                        .0
                }
            };
        }
        assert!((cur.x - u.x).abs() < 1e-10 && (cur.y - u.y).abs() < 1e-10);
        assert_eq!(u.t, 1.0);
    }

    #[test]
    fn jacobian_of_the_unperturbed_map_is_area_preserving() {
        let sys = unperturbed(1);
        for &level in &[1.0, 10.0, 100.0] {
            for k in 0..5 {
                let (x, y) = point_on_shell(1, level, 1.3 * k as f64);
                let m = poincare_jacobian(&sys, &PlaneState::new(x, y, 0.0), &settings()).unwrap();
                assert!((m.determinant() - 1.0).abs() < 1e-8, "{}", m.determinant());
            }
        }
    }

    #[test]
    fn dilation_jump_scales_the_determinant() {
        let sys = with_impulse("0", "kind = \"plane_expr\"\nI = \"0.1*x\"\nJ = \"0\"");
        let m = poincare_jacobian(&sys, &PlaneState::new(1.5, 0.5, 0.0), &settings()).unwrap();
        assert!((m.determinant() - 1.1).abs() < 1e-6);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let sys = System::from_preset("paper-n1").unwrap();
        let s = PlaneState::new(1.7, -0.8, 0.0);
        let m = poincare_jacobian(&sys, &s, &settings()).unwrap();
        let h = 1e-5;
        let at = |x: f64, y: f64| {
            poincare_map(&sys, &PlaneState::new(x, y, 0.0), &settings())
                .unwrap()
                .0
        };
        let (xp, xm) = (at(s.x + h, s.y), at(s.x - h, s.y));
        let (yp, ym) = (at(s.x, s.y + h), at(s.x, s.y - h));
        let fd = Matrix2::new(
            (xp.x - xm.x) / (2.0 * h),
            (yp.x - ym.x) / (2.0 * h),
            (xp.y - xm.y) / (2.0 * h),
            (yp.y - ym.y) / (2.0 * h),
        );
        assert!((m - fd).abs().max() < 1e-5, "{m} vs {fd}");
        assert!((m.determinant() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn blow_up_is_reported() {
        let sys = with_impulse("0", "kind = \"plane_expr\"\nI = \"1e13\"\nJ = \"0\"");
        let err = poincare_map(&sys, &PlaneState::new(1.0, 0.0, 0.0), &settings()).unwrap_err();
        assert!(err.is_blow_up(), "{err}");
    }

    #[test]
    fn single_iteration_equals_the_map() {
        let sys = System::from_preset("paper-n1").unwrap();
        let s = PlaneState::new(3.0, 0.0, 0.0);
        let orbit = iterate_map(&sys, &s, 1, &settings());
        let (u, _) = poincare_map(&sys, &s, &settings()).unwrap();
        assert_eq!(orbit.samples.len(), 2);
        assert_eq!((orbit.samples[1].x, orbit.samples[1].y), (u.x, u.y));
    }

    #[test]
    fn lift_advances_at_the_unperturbed_rate() {
        let sys = unperturbed(1);
        let t0 = sys.chart().period();
        for &amp in &[1.0, 2.0] {
            let orbit = iterate_map(
                &sys,
                &PlaneState::new(amp, 0.0, 0.0),
                100,
                &IntegratorSettings::precise(),
            );
            assert_eq!(orbit.status, OrbitStatus::Completed);
            let first = orbit.samples[0];
            let last = orbit.samples[100];
            assert!((last.h0 - first.h0).abs() < 1e-9 * first.h0);
            let advance = last.theta_lift - first.theta_lift;
            assert!((advance - 100.0 * amp / t0).abs() < 1e-7, "{advance}");
        }
    }

    #[test]
    fn fast_orbits_are_unwrapped() {
        // about 6 turns per period
        let sys = unperturbed(1);
        let t0 = sys.chart().period();
        let orbit = iterate_map(&sys, &PlaneState::new(45.0, 0.0, 0.0), 10, &settings());
        let advance = orbit.samples[10].theta_lift - orbit.samples[0].theta_lift;
        assert!((advance - 10.0 * 45.0 / t0).abs() < 1e-6, "{advance}");
    }

    #[test]
    fn origin_has_no_lift() {
        let sys = unperturbed(1);
        let orbit = iterate_map(&sys, &PlaneState::new(0.0, 0.0, 0.0), 3, &settings());
        assert!(!orbit.lift_valid);
        assert_eq!(orbit.periods_completed, 3);
    }

    #[test]
    fn cap_stops_growing_orbits() {
        let sys = with_impulse("0", "kind = \"plane_expr\"\nI = \"0.2*x\"\nJ = \"0\"");
        let opts = OrbitOptions { h0_cap: Some(10.0) };
        let orbit = iterate_map_with(
            &sys,
            &PlaneState::new(2.0, 0.0, 0.0),
            1000,
            &settings(),
            &opts,
        );
        assert!(
            matches!(orbit.status, OrbitStatus::Capped { .. }),
            "{:?}",
            orbit.status
        );
        assert!(orbit.max_h0 > 10.0 * orbit.samples[0].h0);
    }

    #[test]
    fn trajectory_shows_both_limits() {
        let sys = System::from_preset("paper-n1").unwrap();
        let (rows, err) = trajectory(&sys, &PlaneState::new(2.0, 0.0, 0.0), 2.0, 20, &settings());
        assert!(err.is_none());
        let jumps: Vec<_> = rows.iter().filter(|r| r.kind != RowKind::Flow).collect();
        assert_eq!(jumps.len(), 4);
        assert_eq!(jumps[0].t, 0.5);
        assert_eq!(jumps[0].kind, RowKind::JumpLeft);
        assert_eq!(jumps[1].kind, RowKind::JumpRight);
        assert!(rows.windows(2).all(|w| w[1].t >= w[0].t));
        assert_eq!(rows.last().unwrap().t, 2.0);
    }
}
