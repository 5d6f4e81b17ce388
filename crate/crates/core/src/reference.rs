//! Reference solution of `x'' + x^(2n+1) = 0` through `(1, 0)`.
//!
//! The orbit is tabulated on the half period `[0, T0/2]` as a chain of
//! truncated Taylor expansions produced by the Taylor series method; the rest
//! of the period follows from `x0(T0 - s) = x0(s)`, `y0(T0 - s) = -y0(s)`.

use thiserror::Error;

use crate::quadrature::Integrator;

/// Truncation order of the per-node Taylor expansions.
const ORDER: usize = 16;
const INITIAL_HALF_NODES: usize = 1024;
const MAX_HALF_NODES: usize = 1 << 16;
const DEFECT_TARGET: f64 = 1e-11;

type Series = [f64; ORDER + 1];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReferenceError {
    #[error("degree n must be at least 1, got {0}")]
    Degree(u32),
    #[error("|u| = {0} exceeds 1: no reference phase has this position")]
    OutOfRange(f64),
    #[error("reference table did not reach defect {DEFECT_TARGET:e} (best {0:e})")]
    Defect(f64),
}

/// Monotone branch of the reference orbit used when inverting `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `t ∈ [0, T0/2]`, where `x0` falls from 1 to −1 and `y0 ≤ 0`.
    Descending,
    /// `t ∈ [T0/2, T0]`, where `x0` rises back to 1 and `y0 ≥ 0`.
    Ascending,
}

/// Minimal period of the reference orbit,
/// `T0 = 4 sqrt(n+1) ∫_0^1 (1 - x^(2n+2))^(-1/2) dx`.
///
/// The substitution `x = 1 - u²` removes the endpoint singularity:
/// `1 - x^(2n+2) = u² q(x)` with `q(x) = 1 + x + … + x^(2n+1)`.
pub fn compute_period(degree: u32) -> Result<f64, ReferenceError> {
    if degree < 1 {
        return Err(ReferenceError::Degree(degree));
    }
    let top = 2 * degree as i32 + 1;
    let integrand = |u: f64| {
        let x = 1.0 - u * u;
        let q: f64 = (0..=top).map(|k| x.powi(k)).sum();
        2.0 / q.sqrt()
    };
    let integral = Integrator::new(20).integrate(integrand, 0.0, 1.0, 1e-15);
    Ok(4.0 * (degree as f64 + 1.0).sqrt() * integral)
}

#[derive(Debug, Clone)]
pub struct ReferenceOrbit {
    degree: u32,
    period: f64,
    spacing: f64,
    x_series: Vec<Series>,
    y_series: Vec<Series>,
    defect: f64,
}

/// Taylor coefficients of `(x, y)` about a point of `x' = y, y' = -x^m`.
fn taylor_coefficients(power: usize, x: f64, y: f64) -> (Series, Series) {
    let mut a = [0.0; ORDER + 1];
    let mut b = [0.0; ORDER + 1];
    // powers[j][k]: k-th coefficient of x^(j+1)
    let mut powers = vec![[0.0; ORDER + 1]; power];
    a[0] = x;
    b[0] = y;
    for k in 0..ORDER {
        powers[0][k] = a[k];
        for j in 1..power {
            let (done, rest) = powers.split_at_mut(j);
            let prev = &done[j - 1];
            rest[0][k] = (0..=k).map(|i| prev[i] * a[k - i]).sum();
        }
        let kp1 = (k + 1) as f64;
        a[k + 1] = b[k] / kp1;
        b[k + 1] = -powers[power - 1][k] / kp1;
    }
    (a, b)
}

fn horner(c: &Series, tau: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * tau + ck)
}

impl ReferenceOrbit {
    pub fn new(degree: u32) -> Result<Self, ReferenceError> {
        let period = compute_period(degree)?;
        let mut half_nodes = INITIAL_HALF_NODES;
        let mut best = f64::INFINITY;
        while half_nodes <= MAX_HALF_NODES {
            let orbit = Self::tabulate(degree, period, half_nodes);
            if orbit.defect < DEFECT_TARGET {
                return Ok(orbit);
            }
            best = best.min(orbit.defect);
            half_nodes *= 2;
        }
        Err(ReferenceError::Defect(best))
    }

    fn tabulate(degree: u32, period: f64, half_nodes: usize) -> Self {
        let power = 2 * degree as usize + 1;
        let spacing = 0.5 * period / half_nodes as f64;
        let mut x_series = Vec::with_capacity(half_nodes + 1);
        let mut y_series = Vec::with_capacity(half_nodes + 1);
        let (mut x, mut y) = (1.0, 0.0);
        for k in 0..=half_nodes {
            let (a, b) = taylor_coefficients(power, x, y);
            if k < half_nodes {
                x = horner(&a, spacing);
                y = horner(&b, spacing);
            }
            x_series.push(a);
            y_series.push(b);
        }
        let mut orbit = ReferenceOrbit {
            degree,
            period,
            spacing,
            x_series,
            y_series,
            defect: 0.0,
        };
        orbit.defect = orbit.measure_defect();
        orbit
    }

    /// Worst of: energy residual at the nodes and midpoints, mismatch between
    /// neighbouring expansions at midpoints, and the miss at the half-period
    /// turning point `(−1, 0)`.
    fn measure_defect(&self) -> f64 {
        let n1 = self.degree as f64 + 1.0;
        let p = 2 * self.degree as i32 + 2;
        let energy = |x: f64, y: f64| (n1 * y * y + x.powi(p) - 1.0).abs();
        let last = self.x_series.len() - 1;
        let mut worst = (self.x_series[last][0] + 1.0).abs() + self.y_series[last][0].abs();
        let h2 = 0.5 * self.spacing;
        for k in 0..last {
            let (xa, ya) = (horner(&self.x_series[k], h2), horner(&self.y_series[k], h2));
            let (xb, yb) = (
                horner(&self.x_series[k + 1], -h2),
                horner(&self.y_series[k + 1], -h2),
            );
            worst = worst
                .max(energy(self.x_series[k][0], self.y_series[k][0]))
                .max(energy(xa, ya))
                .max((xa - xb).abs())
                .max((ya - yb).abs());
        }
        worst
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Minimal period `T0`.
    pub fn period(&self) -> f64 {
        self.period
    }

    /// Nodes per full period.
    pub fn nodes_per_period(&self) -> usize {
        2 * (self.x_series.len() - 1)
    }

    /// Largest internal consistency defect measured at construction.
    pub fn defect(&self) -> f64 {
        self.defect
    }

    /// Evaluates on the half period, `s ∈ [0, T0/2]`.
    fn eval_half(&self, s: f64) -> (f64, f64) {
        let last = self.x_series.len() - 1;
        let k = ((s / self.spacing).round().max(0.0) as usize).min(last);
        let tau = s - k as f64 * self.spacing;
        (
            horner(&self.x_series[k], tau),
            horner(&self.y_series[k], tau),
        )
    }

    /// `(x0(t), y0(t))` for any real `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let tm = t.rem_euclid(self.period);
        if tm <= 0.5 * self.period {
            self.eval_half(tm)
        } else {
            let (x, y) = self.eval_half(self.period - tm);
            (x, -y)
        }
    }

    /// Solves `x0(t) = u` on the requested monotone branch.
    pub fn invert_x0(&self, u: f64, branch: Branch) -> Result<f64, ReferenceError> {
        if !(u.abs() <= 1.0 + 1e-14) {
            return Err(ReferenceError::OutOfRange(u));
        }
        let u = u.clamp(-1.0, 1.0);
        let s = self.invert_descending(u);
        Ok(match branch {
            Branch::Descending => s,
            Branch::Ascending => self.period - s,
        })
    }

    fn invert_descending(&self, u: f64) -> f64 {
        let last = self.x_series.len() - 1;
        if u >= 1.0 {
            return 0.0;
        }
        if u <= -1.0 {
            return 0.5 * self.period;
        }
        // node positions decrease from 1 to -1
        let first_below = self.x_series.partition_point(|c| c[0] >= u);
        let k = first_below.saturating_sub(1).min(last - 1);
        let mut lo = k as f64 * self.spacing;
        let mut hi = (k + 1) as f64 * self.spacing;
        let (x_lo, x_hi) = (self.x_series[k][0], self.x_series[k + 1][0]);
        let mut t = if x_lo > x_hi {
            lo + (x_lo - u) / (x_lo - x_hi) * (hi - lo)
        } else {
            0.5 * (lo + hi)
        };
        let tiny = 4.0 * f64::EPSILON * self.period;
        for _ in 0..200 {
            let (x, y) = self.eval_half(t);
            let f = x - u;
            if f == 0.0 {
                break;
            }
            if f > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let newton = t - f / y;
            let next = if y != 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let done = (next - t).abs() <= tiny || hi - lo <= tiny;
            t = next;
            if done {
                break;
            }
        }
        t
    }

    /// Phase `s ∈ [0, T0/2]` of the normalised point `(u, w)` on the
    /// descending half (`w ≤ 0`), where `u^(2n+2) + (n+1) w² = 1`.
    ///
    /// Starts from the `x0` inversion and polishes with Newton on whichever
    /// of `x0`, `y0` is better conditioned, so accuracy holds at the turning
    /// points too.
    pub(crate) fn phase_descending(&self, u: f64, w: f64) -> f64 {
        let power = 2 * self.degree as i32 + 1;
        let half = 0.5 * self.period;
        let mut s = self.invert_descending(u.clamp(-1.0, 1.0));
        for _ in 0..4 {
            let (x, y) = self.eval_half(s);
            let dy = -x.powi(power);
            let step = if y.abs() >= dy.abs() {
                (x - u) / y
            } else {
                (y - w) / dy
            };
            if !step.is_finite() {
                break;
            }
            s = (s - step).clamp(0.0, half);
            if step.abs() <= f64::EPSILON * self.period {
                break;
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn energy_residual(orbit: &ReferenceOrbit, t: f64) -> f64 {
        let n = orbit.degree() as f64;
        let (x, y) = orbit.eval(t);
        ((n + 1.0) * y * y + x.powi(2 * orbit.degree() as i32 + 2) - 1.0).abs()
    }

    #[test]
    fn degree_zero_is_rejected() {
        assert_eq!(compute_period(0), Err(ReferenceError::Degree(0)));
        assert!(ReferenceOrbit::new(0).is_err());
    }

    #[test]
    fn period_n1_matches_lemniscate_constant() {
        // 4 sqrt(2) ∫ (1 - x^4)^(-1/2) = 4 sqrt(2) * ϖ/2, ϖ = 2.622057554292119810464839589891...
        let lemniscate = 2.622_057_554_292_119_8;
        let expected = 2.0 * 2f64.sqrt() * lemniscate;
        assert!((compute_period(1).unwrap() - expected).abs() < 1e-13);
        assert!((expected - 7.4163).abs() < 1e-4);
    }

    #[test]
    fn table_is_pinned_and_periodic() {
        for n in 1..=3 {
            let orbit = ReferenceOrbit::new(n).unwrap();
            assert!(orbit.nodes_per_period() >= 2048);
            assert!(orbit.defect() < 1e-11);
            assert_eq!(orbit.eval(0.0), (1.0, 0.0));
            let t0 = orbit.period();
            let (x, y) = orbit.eval(t0);
            assert!((x - 1.0).abs() < 1e-10 && y.abs() < 1e-10);
            let (x, y) = orbit.eval(0.5 * t0);
            assert!((x + 1.0).abs() < 1e-12 && y.abs() < 1e-12);
            for m in 1..=100 {
                let (x, y) = orbit.eval(m as f64 * t0);
                assert!((x - 1.0).abs() < 1e-9 && y.abs() < 1e-9, "m={m}");
            }
        }
    }

    #[test]
    fn energy_is_pinned_on_dense_samples() {
        for n in 1..=3 {
            let orbit = ReferenceOrbit::new(n).unwrap();
            let t0 = orbit.period();
            let worst = (0..10_000)
                .map(|i| energy_residual(&orbit, i as f64 * t0 / 9_999.0 * 1.37))
                .fold(0.0, f64::max);
            assert!(worst <= 1e-10, "n={n}: {worst:e}");
        }
    }

    #[test]
    fn symmetries_hold() {
        let orbit = ReferenceOrbit::new(2).unwrap();
        for &t in &[0.1, 0.77, 1.9, 2.5] {
            let (xp, yp) = orbit.eval(t);
            let (xm, ym) = orbit.eval(-t);
            assert!((xp - xm).abs() < 1e-14 && (yp + ym).abs() < 1e-14);
        }
    }

    #[test]
    fn interpolant_satisfies_the_ode() {
        for n in 1..=3 {
            let orbit = ReferenceOrbit::new(n).unwrap();
            let h = 1e-5;
            for i in 0..200 {
                let t = 0.013 + i as f64 * orbit.period() / 200.0;
                let (xp, yp) = orbit.eval(t + h);
                let (xm, ym) = orbit.eval(t - h);
                let (x, y) = orbit.eval(t);
                let dx = (xp - xm) / (2.0 * h);
                let dy = (yp - ym) / (2.0 * h);
                assert!((dx - y).abs() < 1e-8, "n={n} t={t}");
                assert!((dy + x.powi(2 * n as i32 + 1)).abs() < 1e-8, "n={n} t={t}");
            }
        }
    }

    #[test]
    fn inversion_endpoints_and_zero_crossing() {
        for n in 1..=3 {
            let orbit = ReferenceOrbit::new(n).unwrap();
            let t0 = orbit.period();
            assert_eq!(orbit.invert_x0(1.0, Branch::Descending).unwrap(), 0.0);
            assert_eq!(orbit.invert_x0(-1.0, Branch::Descending).unwrap(), 0.5 * t0);
            let t = orbit.invert_x0(0.0, Branch::Descending).unwrap();
            assert!(t > 0.0 && t < 0.5 * t0);
            let (x, y) = orbit.eval(t);
            assert!(x.abs() < 1e-14);
            assert!((y + 1.0 / (n as f64 + 1.0).sqrt()).abs() < 1e-12);
            // zero crossing is the quarter period by symmetry
            assert!((t - 0.25 * t0).abs() < 1e-12);
            let ta = orbit.invert_x0(0.0, Branch::Ascending).unwrap();
            assert!((ta - 0.75 * t0).abs() < 1e-12);
            assert!(orbit.invert_x0(1.5, Branch::Descending).is_err());
            assert!(orbit.invert_x0(f64::NAN, Branch::Descending).is_err());
        }
    }

    #[test]
    fn inversion_is_a_right_inverse() {
        let orbit = ReferenceOrbit::new(1).unwrap();
        for i in 0..100 {
            let u = -1.0 + 2.0 * i as f64 / 99.0;
            for branch in [Branch::Descending, Branch::Ascending] {
                let t = orbit.invert_x0(u, branch).unwrap();
                assert!((orbit.eval(t).0 - u).abs() <= 1e-10, "u={u}");
            }
        }
    }
}
