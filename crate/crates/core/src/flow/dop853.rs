//! Adaptive Dormand–Prince 8(5,3) integrator with 7th-order dense output.
//!
//! Step-size control and the blended 5th/3rd-order error norm follow Hairer's
//! DOP853.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tableau::{A, C, D, E3, E5};

const STAGES: usize = 12;
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

/// Tolerances and limits for the adaptive integrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSettings {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    /// Accepted plus rejected steps allowed per call.
    pub max_steps: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 1.0,
            max_steps: 2_000_000,
        }
    }
}

impl IntegratorSettings {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        IntegratorSettings {
            rtol,
            atol,
            ..Default::default()
        }
    }

    /// Settings tight enough for long conservation checks (`rtol = 1e-12`).
    pub fn precise() -> Self {
        Self::with_tolerances(1e-12, 1e-14)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(format!(
                "integrator tolerances must be positive (rtol={}, atol={})",
                self.rtol, self.atol
            ));
        }
        if !(self.max_step > 0.0) {
            return Err(format!("max_step must be positive, got {}", self.max_step));
        }
        if self.max_steps == 0 {
            return Err("max_steps must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError<E> {
    #[error("right-hand side failed at t={t}: {source}")]
    Rhs { t: f64, source: E },
    #[error("step size underflow at t={0}")]
    StepTooSmall(f64),
    #[error("non-finite state at t={0}")]
    NonFinite(f64),
    #[error("state left the admissible region at t={0}")]
    Escaped(f64),
    #[error("step budget exhausted at t={0}")]
    TooManySteps(f64),
}

/// Continuous extension over one accepted step.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    t_old: f64,
    t_new: f64,
    y_old: [f64; N],
    coeffs: [[f64; N]; 7],
}

impl<const N: usize> DenseStep<N> {
    pub fn t_start(&self) -> f64 {
        self.t_old
    }

    pub fn t_end(&self) -> f64 {
        self.t_new
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let x = (t - self.t_old) / (self.t_new - self.t_old);
        let mut y = [0.0; N];
        for (i, f) in self.coeffs.iter().rev().enumerate() {
            let w = if i % 2 == 0 { x } else { 1.0 - x };
            for k in 0..N {
                y[k] = (y[k] + f[k]) * w;
            }
        }
        for k in 0..N {
            y[k] += self.y_old[k];
        }
        y
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

fn rms_norm<const N: usize>(v: &[f64; N], scale: &[f64; N]) -> f64 {
    (v.iter()
        .zip(scale)
        .map(|(a, s)| (a / s).powi(2))
        .sum::<f64>()
        / N as f64)
        .sqrt()
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, weights: &[f64], k: &[[f64; N]]) -> [f64; N] {
    let mut out = *y;
    for (w, kj) in weights.iter().zip(k) {
        if *w != 0.0 {
            for i in 0..N {
                out[i] += h * w * kj[i];
            }
        }
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// `escaped` is checked after every accepted step; `observer` receives the
/// dense extension of every accepted step.
pub fn solve<const N: usize, E>(
    f: &mut impl FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    settings: &IntegratorSettings,
    escaped: impl Fn(&[f64; N]) -> bool,
    mut observer: Option<&mut dyn FnMut(&DenseStep<N>) -> Result<(), E>>,
) -> Result<([f64; N], Stats), IntegrationError<E>> {
    let mut stats = Stats::default();
    if t1 == t0 {
        return Ok((y0, stats));
    }
    let direction = (t1 - t0).signum();
    let rtol = settings.rtol;
    let atol = settings.atol;
    let mut eval =
        |t: f64, y: &[f64; N], stats: &mut Stats| -> Result<[f64; N], IntegrationError<E>> {
            stats.evaluations += 1;
            let v = f(t, y).map_err(|source| IntegrationError::Rhs { t, source })?;
            if v.iter().all(|c| c.is_finite()) {
                Ok(v)
            } else {
                Err(IntegrationError::NonFinite(t))
            }
        };

    let mut t = t0;
    let mut y = y0;
    let mut fy = eval(t, &y, &mut stats)?;
    let mut h_abs = initial_step(&mut eval, t0, &y0, &fy, t1, settings, &mut stats)?;
    let mut k = [[0.0; N]; 16];

    while direction * (t1 - t) > 0.0 {
        let min_step = 10.0 * (next_after(t, direction) - t).abs();
        h_abs = h_abs.min(settings.max_step).max(min_step);
        let mut rejected = false;
        loop {
            if stats.accepted + stats.rejected >= settings.max_steps {
                return Err(IntegrationError::TooManySteps(t));
            }
            if h_abs < min_step {
                return Err(IntegrationError::StepTooSmall(t));
            }
            let mut t_new = t + direction * h_abs;
            if direction * (t_new - t1) > 0.0 {
                t_new = t1;
            }
            let h = t_new - t;
            h_abs = h.abs();

            k[0] = fy;
            for s in 1..STAGES {
                let ys = axpy(&y, h, &A[s][..s], &k[..s]);
                k[s] = eval(t + C[s] * h, &ys, &mut stats)?;
            }
            let y_new = axpy(&y, h, &A[STAGES][..STAGES], &k[..STAGES]);
            if !y_new.iter().all(|c| c.is_finite()) {
                return Err(IntegrationError::NonFinite(t_new));
            }
            let f_new = eval(t_new, &y_new, &mut stats)?;
            k[STAGES] = f_new;

            let mut scale = [0.0; N];
            for i in 0..N {
                scale[i] = atol + y[i].abs().max(y_new[i].abs()) * rtol;
            }
            let mut err5 = [0.0; N];
            let mut err3 = [0.0; N];
            for (j, kj) in k[..=STAGES].iter().enumerate() {
                for i in 0..N {
                    err5[i] += E5[j] * kj[i];
                    err3[i] += E3[j] * kj[i];
                }
            }
            let e5 = rms_norm(&err5, &scale).powi(2) * N as f64;
            let e3 = rms_norm(&err3, &scale).powi(2) * N as f64;
            let error_norm = if e5 == 0.0 && e3 == 0.0 {
                0.0
            } else {
                h_abs * e5 / ((e5 + 0.01 * e3) * N as f64).sqrt()
            };

            if error_norm < 1.0 {
                let mut factor = if error_norm == 0.0 {
                    MAX_FACTOR
                } else {
                    MAX_FACTOR.min(SAFETY * error_norm.powf(ERROR_EXPONENT))
                };
                if rejected {
                    factor = factor.min(1.0);
                }
                stats.accepted += 1;

                if let Some(obs) = observer.as_deref_mut() {
                    let dense = dense_step(&mut eval, t, h, &y, &y_new, &mut k, &mut stats)?;
                    obs(&dense).map_err(|source| IntegrationError::Rhs { t: t_new, source })?;
                }

                t = t_new;
                y = y_new;
                fy = f_new;
                h_abs *= factor;
                break;
            }
            stats.rejected += 1;
            h_abs *= MIN_FACTOR.max(SAFETY * error_norm.powf(ERROR_EXPONENT));
            rejected = true;
        }
        if escaped(&y) {
            return Err(IntegrationError::Escaped(t));
        }
    }
    Ok((y, stats))
}

fn dense_step<const N: usize, E>(
    eval: &mut impl FnMut(f64, &[f64; N], &mut Stats) -> Result<[f64; N], IntegrationError<E>>,
    t: f64,
    h: f64,
    y_old: &[f64; N],
    y_new: &[f64; N],
    k: &mut [[f64; N]; 16],
    stats: &mut Stats,
) -> Result<DenseStep<N>, IntegrationError<E>> {
    for s in STAGES + 1..16 {
        let ys = axpy(y_old, h, &A[s][..s], &k[..s]);
        k[s] = eval(t + C[s] * h, &ys, stats)?;
    }
    let f_old = k[0];
    let f_new = k[STAGES];
    let mut coeffs = [[0.0; N]; 7];
    for i in 0..N {
        let dy = y_new[i] - y_old[i];
        coeffs[0][i] = dy;
        coeffs[1][i] = h * f_old[i] - dy;
        coeffs[2][i] = 2.0 * dy - h * (f_new[i] + f_old[i]);
    }
    for (r, row) in D.iter().enumerate() {
        for (j, kj) in k.iter().enumerate() {
            if row[j] != 0.0 {
                for i in 0..N {
                    coeffs[3 + r][i] += h * row[j] * kj[i];
                }
            }
        }
    }
    Ok(DenseStep {
        t_old: t,
        t_new: t + h,
        y_old: *y_old,
        coeffs,
    })
}

fn initial_step<const N: usize, E>(
    eval: &mut impl FnMut(f64, &[f64; N], &mut Stats) -> Result<[f64; N], IntegrationError<E>>,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    t1: f64,
    settings: &IntegratorSettings,
    stats: &mut Stats,
) -> Result<f64, IntegrationError<E>> {
    let interval = (t1 - t0).abs();
    let direction = (t1 - t0).signum();
    let mut scale = [0.0; N];
    for i in 0..N {
        scale[i] = settings.atol + y0[i].abs() * settings.rtol;
    }
    let d0 = rms_norm(y0, &scale);
    let d1 = rms_norm(f0, &scale);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
    .min(interval);
    let mut y1 = *y0;
    for i in 0..N {
        y1[i] += h0 * direction * f0[i];
    }
    let f1 = eval(t0 + h0 * direction, &y1, stats)?;
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = rms_norm(&diff, &scale) / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 8.0)
    };
    Ok((100.0 * h0).min(h1).min(interval).min(settings.max_step))
}

fn next_after(t: f64, direction: f64) -> f64 {
    if t == 0.0 {
        return direction * f64::from_bits(1);
    }
    let bits = t.to_bits();
    let away = (t > 0.0) == (direction > 0.0);
    f64::from_bits(if away { bits + 1 } else { bits - 1 })
}
