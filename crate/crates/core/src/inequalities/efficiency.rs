//! Detection-efficiency thresholds for loophole-free Clauser-Horne tests.
//!
//! Scenario: the two-qubit state cos θ|00⟩ + sin θ|11⟩ (θ = π/4 maximally
//! entangled), dichotomic measurements projecting on cos x|0⟩ + sin x|1⟩,
//! and symmetric detection efficiency η. Only detected "+" results count in
//! the CH expression, so with settings (a, b, a′, b′)
//!
//!   CH(η) = η² [P(a,b) − P(a,b′) + P(a′,b) + P(a′,b′)] − η [P(a′) + P(b)],
//!
//! and a local model exists for the observed statistics while CH(η) ≤ 0.
//!
//! For fixed (a, a′) the b and b′ terms are quadratic forms in (cos b, sin b),
//! so their maxima are top eigenvalues of 2×2 matrices. The remaining 2-D
//! search is a coarse grid followed by coordinate refinement.

use std::f64::consts::{FRAC_PI_4, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Grid points per setting angle in the coarse search.
pub const GRID_POINTS: usize = 32;
/// Final coordinate step of the local refinement, radians.
pub const ANGLE_RESOLUTION: f64 = 1e-6;
/// Width of the final η bracket.
pub const BISECTION_TOL: f64 = 1e-5;
const REFINE_STARTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyScanResult {
    pub state_angle: f64,
    /// (a, b, a′, b′): settings for f1, f2, f3, f4.
    pub optimal_settings: [f64; 4],
    pub threshold_eta: f64,
    pub ch_value_at_eta: f64,
}

fn amplitude(theta: f64, a: f64, b: f64) -> f64 {
    theta.cos() * a.cos() * b.cos() + theta.sin() * a.sin() * b.sin()
}

/// Probability of "+" on one side at setting `x`, perfect detection.
pub fn single_detection_probability(state_angle: f64, x: f64) -> f64 {
    let (c, s) = (state_angle.cos(), state_angle.sin());
    c * c * x.cos().powi(2) + s * s * x.sin().powi(2)
}

/// Perfect-detection outcome distribution `[[P(+,+), P(+,−)], [P(−,+), P(−,−)]]`
/// at settings (a, b); "−" projects on the orthogonal direction x + π/2.
pub fn outcome_distribution(state_angle: f64, a: f64, b: f64) -> [[f64; 2]; 2] {
    let h = std::f64::consts::FRAC_PI_2;
    let mut out = [[0.0; 2]; 2];
    for (i, da) in [0.0, h].into_iter().enumerate() {
        for (j, db) in [0.0, h].into_iter().enumerate() {
            out[i][j] = amplitude(state_angle, a + da, b + db).powi(2);
        }
    }
    out
}

/// CH(η) at settings `[a, b, a′, b′]`.
pub fn ch_value(state_angle: f64, eta: f64, settings: &[f64; 4]) -> f64 {
    let [a, b, a2, b2] = *settings;
    let p = |x: f64, y: f64| amplitude(state_angle, x, y).powi(2);
    let joint = p(a, b) - p(a, b2) + p(a2, b) + p(a2, b2);
    let singles = single_detection_probability(state_angle, a2)
        + single_detection_probability(state_angle, b);
    eta * eta * joint - eta * singles
}

/// Top eigenvalue of [[x, y], [y, z]] and the angle of its eigenvector.
fn top_eigen(x: f64, y: f64, z: f64) -> (f64, f64) {
    let mean = 0.5 * (x + z);
    let radius = (0.5 * (x - z)).hypot(y);
    (mean + radius, 0.5 * (2.0 * y).atan2(x - z))
}

/// max over (b, b′) of CH(η) at fixed (a, a′); returns (value, b, b′).
fn best_given_side1(state_angle: f64, eta: f64, a: f64, a2: f64) -> (f64, f64, f64) {
    let (c, s) = (state_angle.cos(), state_angle.sin());
    let u = [c * a.cos(), s * a.sin()];
    let u2 = [c * a2.cos(), s * a2.sin()];
    let e2 = eta * eta;
    // b terms: η²(u uᵀ + u′ u′ᵀ) − η diag(c², s²)
    let (v1, b) = top_eigen(
        e2 * (u[0] * u[0] + u2[0] * u2[0]) - eta * c * c,
        e2 * (u[0] * u[1] + u2[0] * u2[1]),
        e2 * (u[1] * u[1] + u2[1] * u2[1]) - eta * s * s,
    );
    // b′ terms: η²(u′ u′ᵀ − u uᵀ)
    let (v2, b2) = top_eigen(
        e2 * (u2[0] * u2[0] - u[0] * u[0]),
        e2 * (u2[0] * u2[1] - u[0] * u[1]),
        e2 * (u2[1] * u2[1] - u[1] * u[1]),
    );
    let value = v1 + v2 - eta * single_detection_probability(state_angle, a2);
    (value, b, b2)
}

fn refine(state_angle: f64, eta: f64, start: (f64, f64)) -> (f64, f64, f64) {
    let eval = |a: f64, a2: f64| best_given_side1(state_angle, eta, a, a2).0;
    let (mut a, mut a2) = start;
    let mut best = eval(a, a2);
    let mut step = PI / GRID_POINTS as f64;
    let mut iterations = 0usize;
    while step >= ANGLE_RESOLUTION && iterations < 200_000 {
        iterations += 1;
        let mut improved = false;
        for (da, da2) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let v = eval(a + da, a2 + da2);
            if v > best {
                best = v;
                a += da;
                a2 += da2;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, a, a2)
}

/// Maximum of CH(η) over the four settings and the maximising settings
/// `[a, b, a′, b′]`.
pub fn max_ch_value(state_angle: f64, eta: f64) -> (f64, [f64; 4]) {
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|k| k as f64 * PI / GRID_POINTS as f64)
        .collect();
    let mut candidates: Vec<(f64, f64, f64)> = Vec::with_capacity(GRID_POINTS * GRID_POINTS);
    for &a in &grid {
        for &a2 in &grid {
            candidates.push((best_given_side1(state_angle, eta, a, a2).0, a, a2));
        }
    }
    // stable sort keeps grid order among ties
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0));

    let mut best: Option<(f64, f64, f64)> = None;
    for &(_, a, a2) in candidates.iter().take(REFINE_STARTS) {
        let refined = refine(state_angle, eta, (a, a2));
        if best.is_none_or(|b| refined.0 > b.0) {
            best = Some(refined);
        }
    }
    let (value, a, a2) = best.expect("grid is non-empty");
    let (_, b, b2) = best_given_side1(state_angle, eta, a, a2);
    let wrap = |x: f64| x.rem_euclid(PI);
    (value, [wrap(a), wrap(b), wrap(a2), wrap(b2)])
}

/// Lowest symmetric efficiency at which the optimised CH expression is
/// violated, for `state_angle ∈ (0, π/4]`.
pub fn efficiency_threshold(state_angle: f64) -> Result<EfficiencyScanResult> {
    if !(state_angle > 0.0 && state_angle <= FRAC_PI_4 + 1e-15) {
        return Err(Error::Domain(format!(
            "state angle {state_angle} outside (0, pi/4]"
        )));
    }
    let (mut lo, mut hi) = (0.5, 1.0);
    let (v_hi, mut settings) = max_ch_value(state_angle, hi);
    let mut value = v_hi;
    if v_hi.is_nan() || v_hi <= 0.0 {
        return Err(Error::Numerical(format!(
            "no CH violation found at unit efficiency for state angle {state_angle}"
        )));
    }
    if max_ch_value(state_angle, lo).0 > 0.0 {
        return Err(Error::Numerical(
            "CH violated at efficiency 0.5; bracket is invalid".into(),
        ));
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let (v, s) = max_ch_value(state_angle, mid);
        if v > 0.0 {
            hi = mid;
            value = v;
            settings = s;
        } else {
            lo = mid;
        }
    }
    Ok(EfficiencyScanResult {
        state_angle,
        optimal_settings: settings,
        threshold_eta: hi,
        ch_value_at_eta: value,
    })
}

/// Thresholds for several state angles, evaluated concurrently; output
/// order follows `angles`.
pub fn efficiency_scan(angles: &[f64]) -> Result<Vec<EfficiencyScanResult>> {
    if angles.is_empty() {
        return Err(Error::InvalidInput("empty angle grid".into()));
    }
    angles
        .par_iter()
        .map(|&a| efficiency_threshold(a))
        .collect()
}
