//! Impulsive Duffing-type oscillators `x'' + x^(2n+1) + Σ p_i(t) x^i = 0`
//! with state jumps at fixed times in each period.
//!
//! The crate integrates the flow, builds the time-1 map and its Jacobian,
//! synthesizes jump maps in action-angle variables of the unperturbed
//! oscillator, and runs numerical diagnostics for boundedness, twist and
//! invariant circles.

pub mod action_angle;
pub mod analysis;
pub mod expr;
pub mod flow;
pub mod impulse;
pub mod model;
pub mod quadrature;
pub mod reference;

pub use action_angle::{ActionAngle, ActionAngleChart};
pub use flow::{IntegratorSettings, OrbitRecord};
pub use impulse::JumpMap;
pub use model::{ConfigDocument, PlaneState, System};
