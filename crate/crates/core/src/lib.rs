//! Workbench for Bell-type tests with entangled neutral kaons.
//!
//! The crate is organised bottom-up:
//!
//! * [`kaon`] single-kaon state algebra: flavor, mass and CP bases, the
//!   ε parametrisation of mixing and effective-Hamiltonian time evolution.
//! * [`pair`] the antisymmetric K⁰K̄⁰ pair, joint projection probabilities
//!   and the equal-time joint decay-channel probabilities.
//! * [`inequalities`] Clauser-Horne, ε, ε′ and |p| ≤ |q| evaluations, plus
//!   the detection-efficiency threshold search for loophole-free CH tests.
//! * [`lhv`] explicit finite local-hidden-variable models, including the
//!   detection-loophole and channel-dependent constructions.

pub mod error;
pub mod inequalities;
pub mod kaon;
pub mod lhv;
pub mod pair;
mod sampling;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Absolute tolerance used for normalisation checks throughout the crate.
pub const NORM_TOL: f64 = 1e-12;

/// Builds `magnitude · e^{i·phase_deg}`.
pub fn polar_deg(magnitude: f64, phase_deg: f64) -> Complex64 {
    Complex64::from_polar(magnitude, phase_deg.to_radians())
}
