//! Action-angle chart of the unperturbed oscillator.
//!
//! `x = (cλ)^α x0(θ T0)`, `y = (cλ)^β y0(θ T0)` with `α = 1/(n+2)`,
//! `β = 1 - α`, `c = 1/(α T0)`. The inverse uses
//! `cλ = [x^(2n+2) + (n+1) y²]^((n+2)/(2n+2))`. Increasing θ at fixed λ moves
//! the plane point clockwise, following the reference orbit.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::reference::{ReferenceError, ReferenceOrbit};

/// Default floor on the action.
pub const LAMBDA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("action {0:e} is below the floor {1:e}")]
    BelowFloor(f64, f64),
    #[error("the origin has no action-angle coordinates")]
    Origin,
    #[error("non-finite input ({0}, {1})")]
    NonFinite(f64, f64),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AAConstants {
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    /// Exponent of the unperturbed Hamiltonian in λ, `a = α(2n+2)`.
    pub a: f64,
}

impl AAConstants {
    pub fn new(degree: u32, period: f64) -> Self {
        let alpha = 1.0 / (degree as f64 + 2.0);
        AAConstants {
            alpha,
            beta: 1.0 - alpha,
            c: 1.0 / (alpha * period),
            a: alpha * (2.0 * degree as f64 + 2.0),
        }
    }
}

/// A point in action-angle coordinates. `theta` is a continuous lift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionAngle {
    pub lambda: f64,
    pub theta: f64,
}

impl ActionAngle {
    pub fn new(lambda: f64, theta: f64) -> Self {
        ActionAngle { lambda, theta }
    }

    /// The lift reduced to `[0, 1)`.
    pub fn theta_mod(&self) -> f64 {
        let r = self.theta - self.theta.floor();
        if r >= 1.0 {
            0.0
        } else {
            r
        }
    }
}

/// The chart φ₀ for one degree `n`: constants plus the reference orbit.
#[derive(Debug, Clone)]
pub struct ActionAngleChart {
    degree: u32,
    constants: AAConstants,
    orbit: Arc<ReferenceOrbit>,
    lambda_floor: f64,
}

impl ActionAngleChart {
    pub fn new(degree: u32) -> Result<Self, ChartError> {
        let orbit = Arc::new(ReferenceOrbit::new(degree)?);
        Ok(Self::from_orbit(orbit))
    }

    pub fn from_orbit(orbit: Arc<ReferenceOrbit>) -> Self {
        let degree = orbit.degree();
        ActionAngleChart {
            degree,
            constants: AAConstants::new(degree, orbit.period()),
            orbit,
            lambda_floor: LAMBDA_FLOOR,
        }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn constants(&self) -> &AAConstants {
        &self.constants
    }

    pub fn orbit(&self) -> &ReferenceOrbit {
        &self.orbit
    }

    pub fn period(&self) -> f64 {
        self.orbit.period()
    }

    pub fn lambda_floor(&self) -> f64 {
        self.lambda_floor
    }

    /// `x^(2n+2) + (n+1) y²`, i.e. `(2n+2)·h0`.
    pub fn energy_norm(&self, x: f64, y: f64) -> f64 {
        x.powi(2 * self.degree as i32 + 2) + (self.degree as f64 + 1.0) * y * y
    }

    /// Action of the unperturbed circle through `(x, y)`.
    pub fn lambda_of(&self, x: f64, y: f64) -> f64 {
        let n = self.degree as f64;
        self.energy_norm(x, y).powf((n + 2.0) / (2.0 * n + 2.0)) / self.constants.c
    }

    /// Action of the energy shell `h0`.
    pub fn lambda_of_energy(&self, h0: f64) -> f64 {
        let n = self.degree as f64;
        ((2.0 * n + 2.0) * h0).powf((n + 2.0) / (2.0 * n + 2.0)) / self.constants.c
    }

    /// Unperturbed `h0` on the circle of action `lambda`.
    pub fn energy_of_lambda(&self, lambda: f64) -> f64 {
        let n = self.degree as f64;
        (self.constants.c * lambda).powf(2.0 * self.constants.beta) / (2.0 * n + 2.0)
    }

    /// Angular frequency (turns per unit time) of the unperturbed circle,
    /// `(cλ)^(n/(n+2)) / T0`.
    pub fn frequency(&self, lambda: f64) -> f64 {
        let n = self.degree as f64;
        (self.constants.c * lambda).powf(n / (n + 2.0)) / self.period()
    }

    /// φ₀: action-angle to plane.
    pub fn from_action_angle(&self, aa: &ActionAngle) -> Result<(f64, f64), ChartError> {
        if !(aa.lambda >= self.lambda_floor) {
            return Err(ChartError::BelowFloor(aa.lambda, self.lambda_floor));
        }
        if !aa.theta.is_finite() {
            return Err(ChartError::NonFinite(aa.lambda, aa.theta));
        }
        let k = &self.constants;
        let cl = k.c * aa.lambda;
        let (x0, y0) = self.orbit.eval(aa.theta_mod() * self.period());
        Ok((cl.powf(k.alpha) * x0, cl.powf(k.beta) * y0))
    }

    /// φ₀⁻¹: plane to action-angle, with `theta` in `[0, 1)`.
    pub fn to_action_angle(&self, x: f64, y: f64) -> Result<ActionAngle, ChartError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(ChartError::NonFinite(x, y));
        }
        let e = self.energy_norm(x, y);
        if e == 0.0 {
            return Err(ChartError::Origin);
        }
        let n = self.degree as f64;
        let lambda = e.powf((n + 2.0) / (2.0 * n + 2.0)) / self.constants.c;
        let t0 = self.period();
        let phase = if y == 0.0 {
            if x > 0.0 {
                0.0
            } else {
                0.5 * t0
            }
        } else {
            let u = x / e.powf(1.0 / (2.0 * n + 2.0));
            let w = y / e.sqrt();
            if y < 0.0 {
                self.orbit.phase_descending(u, w)
            } else {
                t0 - self.orbit.phase_descending(u, -w)
            }
        };
        let mut theta = phase / t0;
        if theta >= 1.0 {
            theta = 0.0;
        }
        Ok(ActionAngle::new(lambda, theta))
    }

    /// `det ∂(x, y)/∂(θ, λ)` by central differences (relative step 1e-6).
    ///
    /// Columns are ordered (angle, action), the canonical pairing in which the
    /// chart is symplectic.
    pub fn jacobian_det(&self, aa: &ActionAngle) -> Result<f64, ChartError> {
        let hl = 1e-6 * aa.lambda;
        let ht = 1e-6;
        let p = |l: f64, t: f64| self.from_action_angle(&ActionAngle::new(l, t));
        let (xl1, yl1) = p(aa.lambda + hl, aa.theta)?;
        let (xl0, yl0) = p(aa.lambda - hl, aa.theta)?;
        let (xt1, yt1) = p(aa.lambda, aa.theta + ht)?;
        let (xt0, yt0) = p(aa.lambda, aa.theta - ht)?;
        let dx_dl = (xl1 - xl0) / (2.0 * hl);
        let dy_dl = (yl1 - yl0) / (2.0 * hl);
        let dx_dt = (xt1 - xt0) / (2.0 * ht);
        let dy_dt = (yt1 - yt0) / (2.0 * ht);
        Ok(dx_dt * dy_dl - dx_dl * dy_dt)
    }
}
