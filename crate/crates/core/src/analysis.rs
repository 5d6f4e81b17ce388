//! Diagnostics on orbits of the time-1 map: rotation numbers, twist,
//! area preservation, boundedness and curve-likeness of orbits.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::action_angle::{ActionAngle, ChartError};
use crate::flow::{
    iterate_map, iterate_map_with, poincare_jacobian, IntegratorSettings, OrbitOptions,
    OrbitRecord, OrbitStatus,
};
use crate::impulse::log_log_slope;
use crate::model::{PlaneState, System};

/// Fewest periods accepted by [`rotation_number`].
pub const MIN_ROTATION_PERIODS: usize = 64;
/// Fewest periods accepted by [`boundedness_scan`].
pub const MIN_BOUNDEDNESS_PERIODS: usize = 100;
/// Fewest periods accepted by [`quasiperiodicity_probe`].
pub const MIN_PROBE_PERIODS: usize = 512;
/// Rotation-number precision required by the probe.
pub const PROBE_PRECISION: f64 = 1e-4;
/// Largest denominator of the excluded resonances.
pub const RESONANCE_ORDER: u32 = 8;
/// Distance to a low-order rational below which the probe abstains.
pub const RESONANCE_GAP: f64 = 1e-3;
/// Calibration constant: scores at or below this count as curve-like.
pub const CURVE_SCORE: f64 = 0.05;
/// Phases per energy shell in the boundedness scan.
pub const SHELL_PHASES: usize = 8;
/// Initial phases per action in the twist profile.
pub const TWIST_PHASES: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need at least {needed} periods, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("orbit did not complete: {0:?}")]
    Incomplete(OrbitStatus),
    #[error("angle undefined: the orbit reaches the origin")]
    UndefinedAngle,
    #[error("grid must be increasing with at least {points} points over {decades} decade(s)")]
    Grid { points: usize, decades: f64 },
    #[error("probe orbit at lambda={lambda}, theta0={theta0} failed: {status:?}")]
    ProbeFailed {
        lambda: f64,
        theta0: f64,
        status: OrbitStatus,
    },
    #[error("rotation number known only to {0:e}, the probe needs {PROBE_PRECISION:e}")]
    Imprecise(f64),
    #[error(transparent)]
    Chart(#[from] ChartError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotationNumber {
    pub omega: f64,
    /// `|ω_N − ω_{N/2}|`.
    pub half_width: f64,
    pub periods: usize,
}

/// Mean lift advance per period with a truncation error estimate.
pub fn rotation_number(orbit: &OrbitRecord) -> Result<RotationNumber, AnalysisError> {
    if !orbit.lift_valid {
        return Err(AnalysisError::UndefinedAngle);
    }
    if orbit.status != OrbitStatus::Completed {
        return Err(AnalysisError::Incomplete(orbit.status.clone()));
    }
    let n = orbit.periods_completed;
    if n < MIN_ROTATION_PERIODS {
        return Err(AnalysisError::TooShort {
            needed: MIN_ROTATION_PERIODS,
            got: n,
        });
    }
    let lift = |k: usize| orbit.samples[k].theta_lift;
    let full = (lift(n) - lift(0)) / n as f64;
    let half = (lift(n / 2) - lift(0)) / (n / 2) as f64;
    Ok(RotationNumber {
        omega: full,
        half_width: (full - half).abs(),
        periods: n,
    })
}

/// Orbit started from action-angle coordinates at `t = 0`.
pub fn orbit_from_action_angle(
    sys: &System,
    lambda: f64,
    theta: f64,
    periods: usize,
    settings: &IntegratorSettings,
) -> Result<OrbitRecord, AnalysisError> {
    let (x, y) = sys
        .chart()
        .from_action_angle(&ActionAngle::new(lambda, theta))?;
    Ok(iterate_map(
        sys,
        &PlaneState::new(x, y, 0.0),
        periods,
        settings,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct TwistProfile {
    pub lambdas: Vec<f64>,
    /// Mean lift advance per period at each λ.
    pub advances: Vec<f64>,
    pub monotone: bool,
    pub exponent: f64,
    /// `n/(n+2)`, the unperturbed exponent.
    pub predicted_exponent: f64,
    pub phases: usize,
    pub periods: usize,
}

/// Angle advance per period as a function of the action.
pub fn twist_profile(
    sys: &System,
    lambdas: &[f64],
    periods: usize,
    settings: &IntegratorSettings,
) -> Result<TwistProfile, AnalysisError> {
    let increasing = lambdas.len() >= 12
        && lambdas[0] > 0.0
        && lambdas.windows(2).all(|w| w[1] > w[0])
        && lambdas[lambdas.len() - 1] / lambdas[0] >= 10.0 * (1.0 - 1e-12);
    if !increasing {
        return Err(AnalysisError::Grid {
            points: 12,
            decades: 1.0,
        });
    }
    if periods == 0 {
        return Err(AnalysisError::TooShort { needed: 1, got: 0 });
    }
    let jobs: Vec<(f64, f64)> = lambdas
        .iter()
        .flat_map(|&l| (0..TWIST_PHASES).map(move |k| (l, k as f64 / TWIST_PHASES as f64)))
        .collect();
    let advances = jobs
        .par_iter()
        .map(|&(lambda, theta0)| {
            let orbit = orbit_from_action_angle(sys, lambda, theta0, periods, settings)?;
            if orbit.status != OrbitStatus::Completed || !orbit.lift_valid {
                return Err(AnalysisError::ProbeFailed {
                    lambda,
                    theta0,
                    status: orbit.status,
                });
            }
            let s = &orbit.samples;
            Ok((s[periods].theta_lift - s[0].theta_lift) / periods as f64)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let means: Vec<f64> = advances
        .chunks(TWIST_PHASES)
        .map(|c| c.iter().sum::<f64>() / TWIST_PHASES as f64)
        .collect();
    let monotone = means.windows(2).all(|w| w[1] > w[0]);
    let pts: Vec<(f64, f64)> = lambdas.iter().cloned().zip(means.iter().cloned()).collect();
    let exponent = log_log_slope(&pts).unwrap_or(f64::NAN);
    let n = sys.degree() as f64;
    Ok(TwistProfile {
        lambdas: lambdas.to_vec(),
        advances: means,
        monotone,
        exponent,
        predicted_exponent: n / (n + 2.0),
        phases: TWIST_PHASES,
        periods,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AreaRow {
    pub x: f64,
    pub y: f64,
    pub h0: f64,
    pub det: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AreaReport {
    pub rows: Vec<AreaRow>,
    /// Worst `|det − 1|` over the points that succeeded.
    pub max_abs_deviation: f64,
    pub worst_index: Option<usize>,
    pub failures: usize,
}

/// Determinant of the time-1 Jacobian at each point.
pub fn area_report(
    sys: &System,
    points: &[PlaneState],
    settings: &IntegratorSettings,
) -> AreaReport {
    let rows: Vec<AreaRow> = points
        .par_iter()
        .map(|p| {
            let (det, error) = match poincare_jacobian(sys, p, settings) {
                Ok(m) => (Some(m.determinant()), None),
                Err(e) => (None, Some(e.to_string())),
            };
            AreaRow {
                x: p.x,
                y: p.y,
                h0: sys.h0(p.x, p.y),
                det,
                error,
            }
        })
        .collect();
    let mut max_abs_deviation = 0.0;
    let mut worst_index = None;
    for (i, r) in rows.iter().enumerate() {
        if let Some(d) = r.det {
            if worst_index.is_none() || (d - 1.0).abs() > max_abs_deviation {
                max_abs_deviation = (d - 1.0).abs();
                worst_index = Some(i);
            }
        }
    }
    let failures = rows.iter().filter(|r| r.det.is_none()).count();
    AreaReport {
        rows,
        max_abs_deviation,
        worst_index,
        failures,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ShellOrbit {
    pub h0_initial: f64,
    pub theta0: f64,
    pub x0: f64,
    pub y0: f64,
    pub min_h0: f64,
    pub max_h0: f64,
    pub max_norm: f64,
    pub ratio: f64,
    pub periods_completed: usize,
    pub status: OrbitStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum BoundednessVerdict {
    AllBounded,
    EscapeDetected {
        orbit: usize,
        period: usize,
    },
    GrowthDetected {
        orbit: usize,
        period: usize,
        ratio: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundednessReport {
    pub levels: Vec<f64>,
    pub periods: usize,
    pub cap: f64,
    pub orbits: Vec<ShellOrbit>,
    pub max_ratio: f64,
    pub verdict: BoundednessVerdict,
}

/// Iterates orbits started on energy shells `h0 ∈ levels` (8 phases each) and
/// checks that none escapes or grows beyond `cap` times its initial `h0`.
///
/// An orbit stops as soon as its ratio exceeds `cap`.
pub fn boundedness_scan(
    sys: &System,
    levels: &[f64],
    periods: usize,
    cap: f64,
    settings: &IntegratorSettings,
) -> Result<BoundednessReport, AnalysisError> {
    if periods < MIN_BOUNDEDNESS_PERIODS {
        return Err(AnalysisError::TooShort {
            needed: MIN_BOUNDEDNESS_PERIODS,
            got: periods,
        });
    }
    let chart = sys.chart();
    let mut starts = Vec::with_capacity(levels.len() * SHELL_PHASES);
    for &level in levels {
        let lambda = chart.lambda_of_energy(level);
        for k in 0..SHELL_PHASES {
            let theta0 = k as f64 / SHELL_PHASES as f64;
            let (x, y) = chart.from_action_angle(&ActionAngle::new(lambda, theta0))?;
            starts.push((level, theta0, x, y));
        }
    }
    let options = OrbitOptions { h0_cap: Some(cap) };
    let orbits: Vec<ShellOrbit> = starts
        .par_iter()
        .map(|&(level, theta0, x, y)| {
            let orbit = iterate_map_with(
                sys,
                &PlaneState::new(x, y, 0.0),
                periods,
                settings,
                &options,
            );
            let h_init = orbit.samples[0].h0;
            ShellOrbit {
                h0_initial: level,
                theta0,
                x0: x,
                y0: y,
                min_h0: orbit.min_h0,
                max_h0: orbit.max_h0,
                max_norm: orbit.max_norm,
                ratio: orbit.max_h0 / h_init,
                periods_completed: orbit.periods_completed,
                status: orbit.status,
            }
        })
        .collect();
    let mut verdict = BoundednessVerdict::AllBounded;
    for (i, o) in orbits.iter().enumerate() {
        match &o.status {
            OrbitStatus::Escaped { period, .. } | OrbitStatus::Failed { period, .. } => {
                verdict = BoundednessVerdict::EscapeDetected {
                    orbit: i,
                    period: *period,
                };
                break;
            }
            _ if o.ratio > cap => {
                verdict = BoundednessVerdict::GrowthDetected {
                    orbit: i,
                    period: o.periods_completed,
                    ratio: o.ratio,
                };
                break;
            }
            _ => {}
        }
    }
    let max_ratio = orbits.iter().map(|o| o.ratio).fold(0.0, f64::max);
    Ok(BoundednessReport {
        levels: levels.to_vec(),
        periods,
        cap,
        orbits,
        max_ratio,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ProbeOutcome {
    CurveLike,
    NotCurveLike,
    /// ω lies within the resonance gap of `p/q`.
    Inconclusive {
        p: i64,
        q: u32,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub rotation: RotationNumber,
    pub outcome: ProbeOutcome,
    /// Largest deviation of λ from its smoothed graph over the mean λ.
    pub score: Option<f64>,
    pub max_gap: Option<f64>,
    pub total_variation: Option<f64>,
    pub neighbour_dispersion: Option<f64>,
    pub mean_lambda: f64,
}

/// `p/q` with `q ≤ RESONANCE_ORDER` within `RESONANCE_GAP` of `omega`.
pub fn nearby_resonance(omega: f64) -> Option<(i64, u32)> {
    (1..=RESONANCE_ORDER).find_map(|q| {
        let p = (omega * q as f64).round();
        ((omega - p / q as f64).abs() < RESONANCE_GAP).then_some((p as i64, q))
    })
}

/// Measures how well the orbit's λ values form a graph over the conjugated
/// angle `θ₀ + kω (mod 1)`.
pub fn quasiperiodicity_probe(orbit: &OrbitRecord) -> Result<ProbeReport, AnalysisError> {
    if orbit.periods_completed < MIN_PROBE_PERIODS {
        return Err(AnalysisError::TooShort {
            needed: MIN_PROBE_PERIODS,
            got: orbit.periods_completed,
        });
    }
    let rotation = rotation_number(orbit)?;
    if rotation.half_width >= PROBE_PRECISION {
        return Err(AnalysisError::Imprecise(rotation.half_width));
    }
    let lambdas: Vec<f64> = orbit.samples.iter().map(|s| s.lambda).collect();
    let mean_lambda = lambdas.iter().sum::<f64>() / lambdas.len() as f64;
    if let Some((p, q)) = nearby_resonance(rotation.omega) {
        return Ok(ProbeReport {
            rotation,
            outcome: ProbeOutcome::Inconclusive { p, q },
            score: None,
            max_gap: None,
            total_variation: None,
            neighbour_dispersion: None,
            mean_lambda,
        });
    }
    let theta0 = orbit.samples[0].theta_lift;
    let mut pts: Vec<(f64, f64)> = lambdas
        .iter()
        .enumerate()
        .map(|(k, &l)| ((theta0 + k as f64 * rotation.omega).rem_euclid(1.0), l))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let m = pts.len();

    let max_gap = (0..m)
        .map(|i| {
            let next = if i + 1 == m {
                pts[0].0 + 1.0
            } else {
                pts[i + 1].0
            };
            next - pts[i].0
        })
        .fold(0.0, f64::max);
    let total_variation: f64 = (0..m)
        .map(|i| (pts[(i + 1) % m].1 - pts[i].1).abs())
        .sum::<f64>()
        / mean_lambda;
    let neighbour_dispersion = (0..m)
        .map(|i| (pts[(i + 1) % m].1 - pts[i].1).abs())
        .fold(0.0, f64::max)
        / mean_lambda;

    let half = (m / 64).max(1);
    let score = (0..m)
        .map(|i| {
            let sum: f64 = (i + m - half..=i + m + half).map(|j| pts[j % m].1).sum();
            let smooth = sum / (2 * half + 1) as f64;
            (pts[i].1 - smooth).abs()
        })
        .fold(0.0, f64::max)
        / mean_lambda;
    let outcome = if score <= CURVE_SCORE {
        ProbeOutcome::CurveLike
    } else {
        ProbeOutcome::NotCurveLike
    };
    Ok(ProbeReport {
        rotation,
        outcome,
        score: Some(score),
        max_gap: Some(max_gap),
        total_variation: Some(total_variation),
        neighbour_dispersion: Some(neighbour_dispersion),
        mean_lambda,
    })
}
