//! Single-kaon state algebra.
//!
//! States are coordinate vectors on the flavor basis {|K⁰⟩, |K̄⁰⟩}. The mass
//! eigenstates are built from the mixing parameters p = 1 + ε, q = 1 − ε and
//! evolve with the complex eigenvalues λ = m − iγ/2 of the effective
//! Hamiltonian. Units are τ_S = ħ = 1.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, NORM_TOL};

/// Dimensionless complex amplitude.
pub type ComplexScalar = Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Single-kaon state on the {|K⁰⟩, |K̄⁰⟩} basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlavorState {
    pub k0: Complex64,
    pub k0bar: Complex64,
}

impl FlavorState {
    pub const fn new(k0: Complex64, k0bar: Complex64) -> Self {
        Self { k0, k0bar }
    }

    /// |K⁰⟩
    pub const fn k0_state() -> Self {
        Self::new(ONE, ZERO)
    }

    /// |K̄⁰⟩
    pub const fn k0bar_state() -> Self {
        Self::new(ZERO, ONE)
    }

    pub fn components(&self) -> [Complex64; 2] {
        [self.k0, self.k0bar]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.k0.norm_sqr() + self.k0bar.norm_sqr()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &FlavorState) -> Complex64 {
        self.k0.conj() * other.k0 + self.k0bar.conj() * other.k0bar
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::new(self.k0 * factor, self.k0bar * factor)
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Domain("cannot normalize a null state".into()));
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn is_finite(&self) -> bool {
        self.k0.is_finite() && self.k0bar.is_finite()
    }

    /// Errors unless the squared norm is 1 within [`NORM_TOL`].
    pub fn require_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::Unnormalized {
                norm_sqr: self.norm_sqr(),
            })
        }
    }
}

/// CP-violation parametrisation of K⁰–K̄⁰ mixing.
///
/// Only ε and the CP phase α are stored; p and q are always derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingParams {
    epsilon: Complex64,
    alpha: f64,
}

impl MixingParams {
    pub fn epsilon(&self) -> Complex64 {
        self.epsilon
    }

    /// Phase of the CP eigenstates, radians.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self) -> Complex64 {
        ONE + self.epsilon
    }

    pub fn q(&self) -> Complex64 {
        ONE - self.epsilon
    }

    /// |p|² + |q|²
    pub fn norm_sqr(&self) -> f64 {
        self.p().norm_sqr() + self.q().norm_sqr()
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self {
            epsilon: self.epsilon,
            alpha,
        }
    }
}

/// p = 1 + ε, q = 1 − ε, with α stored verbatim.
pub fn mixing_from_epsilon(epsilon: Complex64, alpha: f64) -> Result<MixingParams> {
    if !epsilon.is_finite() {
        return Err(Error::Domain(format!("non-finite epsilon {epsilon}")));
    }
    if !alpha.is_finite() {
        return Err(Error::Domain(format!("non-finite alpha {alpha}")));
    }
    Ok(MixingParams { epsilon, alpha })
}

/// Widths and mass difference of the effective Hamiltonian, in τ_S units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionParams {
    gamma_s: f64,
    gamma_l: f64,
    delta_m: f64,
}

impl EvolutionParams {
    pub fn new(gamma_s: f64, gamma_l: f64, delta_m: f64) -> Result<Self> {
        if !(gamma_s.is_finite() && gamma_l.is_finite() && delta_m.is_finite()) {
            return Err(Error::Domain("non-finite evolution parameter".into()));
        }
        if !(gamma_s > gamma_l && gamma_l >= 0.0) {
            return Err(Error::Domain(format!(
                "require gamma_S > gamma_L >= 0, got gamma_S = {gamma_s}, gamma_L = {gamma_l}"
            )));
        }
        Ok(Self {
            gamma_s,
            gamma_l,
            delta_m,
        })
    }

    pub fn gamma_s(&self) -> f64 {
        self.gamma_s
    }

    pub fn gamma_l(&self) -> f64 {
        self.gamma_l
    }

    pub fn delta_m(&self) -> f64 {
        self.delta_m
    }

    /// λ_S = −iγ_S/2 (mass origin at m_S).
    pub fn lambda_s(&self) -> Complex64 {
        Complex64::new(0.0, -self.gamma_s / 2.0)
    }

    /// λ_L = Δm − iγ_L/2
    pub fn lambda_l(&self) -> Complex64 {
        Complex64::new(self.delta_m, -self.gamma_l / 2.0)
    }
}

impl Default for EvolutionParams {
    /// γ_S = 1, γ_L = 0, Δm = 0: an idealised stable K_L.
    fn default() -> Self {
        Self {
            gamma_s: 1.0,
            gamma_l: 0.0,
            delta_m: 0.0,
        }
    }
}

/// Returns `(K_S, K_L)` with K_L = (p, q)/N and K_S = (p, −q)/N,
/// N = √(|p|² + |q|²).
pub fn mass_eigenstates(m: &MixingParams) -> (FlavorState, FlavorState) {
    let n = Complex64::new(m.norm_sqr().sqrt(), 0.0);
    let (p, q) = (m.p() / n, m.q() / n);
    (FlavorState::new(p, -q), FlavorState::new(p, q))
}

/// Returns `(K_plus, K_minus)` = ((1, −e^{iα}), (1, e^{iα}))/√2.
///
/// At α = 0 these coincide with the ε = 0 K_S and K_L respectively.
pub fn cp_eigenstates(alpha: f64) -> (FlavorState, FlavorState) {
    let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let phase = Complex64::from_polar(FRAC_1_SQRT_2, alpha);
    (FlavorState::new(s, -phase), FlavorState::new(s, phase))
}

/// Coefficients `(a_S, a_L)` with `s = a_S·K_S + a_L·K_L`.
pub fn mass_components(s: &FlavorState, m: &MixingParams) -> Result<(Complex64, Complex64)> {
    let (p, q) = (m.p(), m.q());
    if p.norm_sqr() == 0.0 || q.norm_sqr() == 0.0 {
        return Err(Error::Domain(
            "mass eigenstates are degenerate (p = 0 or q = 0)".into(),
        ));
    }
    let n = m.norm_sqr().sqrt();
    let u = s.k0 / p;
    let v = s.k0bar / q;
    Ok(((u - v) * (n / 2.0), (u + v) * (n / 2.0)))
}

/// Wigner–Weisskopf evolution: the K_S and K_L components pick up
/// e^{−iλ_S t} and e^{−iλ_L t}. The result is not renormalized.
pub fn evolve_single(
    s: &FlavorState,
    t: f64,
    ev: &EvolutionParams,
    m: &MixingParams,
) -> Result<FlavorState> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(*s);
    }
    let (a_s, a_l) = mass_components(s, m)?;
    let (ks, kl) = mass_eigenstates(m);
    let phase_s = (-Complex64::i() * ev.lambda_s() * t).exp();
    let phase_l = (-Complex64::i() * ev.lambda_l() * t).exp();
    let (cs, cl) = (a_s * phase_s, a_l * phase_l);
    Ok(FlavorState::new(
        cs * ks.k0 + cl * kl.k0,
        cs * ks.k0bar + cl * kl.k0bar,
    ))
}

/// |⟨target|s⟩|²; `target` must be normalized.
pub fn projection_probability(s: &FlavorState, target: &FlavorState) -> Result<f64> {
    target.require_normalized()?;
    Ok(target.inner(s).norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paper_eps() -> Complex64 {
        crate::polar_deg(2.284e-3, 43.52)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cp_conserving_limit() {
        let m = mixing_from_epsilon(Complex64::new(0.0, 0.0), 0.0).unwrap();
        assert_eq!(m.p(), ONE);
        assert_eq!(m.q(), ONE);
        let (ks, kl) = mass_eigenstates(&m);
        assert!(close(ks.k0.re, FRAC_1_SQRT_2, 1e-15));
        assert!(close(ks.k0bar.re, -FRAC_1_SQRT_2, 1e-15));
        assert!(close(kl.k0bar.re, FRAC_1_SQRT_2, 1e-15));
        assert!(ks.inner(&kl).norm() < 1e-15);
    }

    #[test]
    fn paper_epsilon_identity_and_overlap() {
        let m = mixing_from_epsilon(paper_eps(), 0.0).unwrap();
        let diff = m.p().norm_sqr() - m.q().norm_sqr();
        // direct complex arithmetic: 4·Re ε
        assert!(close(diff, 6.624824641967e-3, 1e-15));
        let (ks, kl) = mass_eigenstates(&m);
        assert!(ks.is_normalized() && kl.is_normalized());
        let overlap = ks.inner(&kl);
        assert!(close(overlap.re, 3.312395041358e-3, 1e-14));
        assert!(overlap.im.abs() < 1e-15);
    }

    #[test]
    fn pure_imaginary_epsilon_balances_p_and_q() {
        for y in [-0.3, 1e-3, 0.7] {
            let m = mixing_from_epsilon(Complex64::new(0.0, y), 0.0).unwrap();
            assert_eq!(m.p().norm(), m.q().norm());
        }
    }

    #[test]
    fn non_finite_epsilon_rejected() {
        let err = mixing_from_epsilon(Complex64::new(f64::NAN, 0.0), 0.0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        assert!(mixing_from_epsilon(Complex64::new(0.0, f64::INFINITY), 0.0).is_err());
    }

    #[test]
    fn cp_eigenstate_conventions() {
        let (kp, km) = cp_eigenstates(0.0);
        assert!(close(kp.k0.re, FRAC_1_SQRT_2, 1e-15));
        assert!(close(kp.k0bar.re, -FRAC_1_SQRT_2, 1e-15));
        assert!(kp.inner(&km).norm() < 1e-15);
        let (kp_pi, _) = cp_eigenstates(std::f64::consts::PI);
        assert!(close(kp_pi.k0bar.re, FRAC_1_SQRT_2, 1e-15));
        assert!(kp_pi.k0bar.im.abs() < 1e-15);
        // coincides with K_S at ε = 0
        let m = mixing_from_epsilon(ZERO, 0.0).unwrap();
        let (ks, kl) = mass_eigenstates(&m);
        assert!(close(kp.inner(&ks).norm(), 1.0, 1e-15));
        assert!(close(km.inner(&kl).norm(), 1.0, 1e-15));
    }

    #[test]
    fn evolution_examples() {
        let ev = EvolutionParams::default();
        let m = mixing_from_epsilon(paper_eps(), 0.3).unwrap();
        let (ks, kl) = mass_eigenstates(&m);
        let s = FlavorState::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
        assert_eq!(evolve_single(&s, 0.0, &ev, &m).unwrap(), s);

        let evolved = evolve_single(&ks, 1.0, &ev, &m).unwrap();
        assert!(close(evolved.norm_sqr(), (-1.0f64).exp(), 1e-13));
        let evolved = evolve_single(&kl, 1.0, &ev, &m).unwrap();
        assert!(close(evolved.norm_sqr(), 1.0, 1e-13));
    }

    #[test]
    fn negative_time_rejected() {
        let m = mixing_from_epsilon(ZERO, 0.0).unwrap();
        let err = evolve_single(
            &FlavorState::k0_state(),
            -0.1,
            &EvolutionParams::default(),
            &m,
        );
        assert_eq!(err.unwrap_err(), Error::NegativeTime(-0.1));
    }

    #[test]
    fn evolution_params_validation() {
        assert!(EvolutionParams::new(1.0, 1.0, 0.0).is_err());
        assert!(EvolutionParams::new(1.0, -0.1, 0.0).is_err());
        let ev = EvolutionParams::new(1.0, 1.75e-3, 0.474).unwrap();
        assert!(close(ev.lambda_s().im, -0.5, 1e-15));
        assert!(close(ev.lambda_l().im, -8.75e-4, 1e-15));
        assert_eq!(ev.lambda_l().re, 0.474);
    }

    #[test]
    fn projection_examples() {
        let m = mixing_from_epsilon(ZERO, 0.0).unwrap();
        let (ks, kl) = mass_eigenstates(&m);
        assert!(close(projection_probability(&ks, &ks).unwrap(), 1.0, 1e-15));
        assert!(projection_probability(&kl, &ks).unwrap() < 1e-30);
        let half = projection_probability(&FlavorState::k0_state(), &ks).unwrap();
        assert!(close(half, 0.5, 1e-15));
        let bad = FlavorState::new(ONE, ONE);
        assert!(matches!(
            projection_probability(&ks, &bad),
            Err(Error::Unnormalized { .. })
        ));
    }

    fn small_eps() -> impl Strategy<Value = Complex64> {
        (0.0..0.1f64, -3.2..3.2f64).prop_map(|(r, phi)| Complex64::from_polar(r, phi))
    }

    fn normalized_state() -> impl Strategy<Value = FlavorState> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-null", |(a, b, c, d)| {
                a * a + b * b + c * c + d * d > 1e-3
            })
            .prop_map(|(a, b, c, d)| {
                FlavorState::new(Complex64::new(a, b), Complex64::new(c, d))
                    .normalized()
                    .unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn p_q_identity(eps in (-1.0..1.0f64, -1.0..1.0f64)) {
            let eps = Complex64::new(eps.0, eps.1);
            let m = mixing_from_epsilon(eps, 0.0).unwrap();
            let lhs = m.p().norm_sqr() - m.q().norm_sqr();
            prop_assert!((lhs - 4.0 * eps.re).abs() <= 1e-12);
        }

        #[test]
        fn flavor_mass_round_trip(eps in small_eps(), s in normalized_state()) {
            let m = mixing_from_epsilon(eps, 0.0).unwrap();
            let (a_s, a_l) = mass_components(&s, &m).unwrap();
            let (ks, kl) = mass_eigenstates(&m);
            let back = FlavorState::new(a_s * ks.k0 + a_l * kl.k0, a_s * ks.k0bar + a_l * kl.k0bar);
            prop_assert!((back.k0 - s.k0).norm() <= 1e-12);
            prop_assert!((back.k0bar - s.k0bar).norm() <= 1e-12);
        }

        #[test]
        fn completeness_at_zero_epsilon(s in normalized_state()) {
            let m = mixing_from_epsilon(ZERO, 0.0).unwrap();
            let (ks, kl) = mass_eigenstates(&m);
            let total = projection_probability(&s, &ks).unwrap()
                + projection_probability(&s, &kl).unwrap();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }

        // The monotonicity only holds for parameter sets compatible with
        // unitarity; the measured kaon parameters are, and so is ε = 0.
        #[test]
        fn norm_non_increasing(s in normalized_state(), physical in any::<bool>()) {
            let (eps, ev) = if physical {
                (paper_eps(), EvolutionParams::new(1.0, 1.75e-3, 0.474).unwrap())
            } else {
                (ZERO, EvolutionParams::new(1.0, 0.2, 0.9).unwrap())
            };
            let m = mixing_from_epsilon(eps, 0.0).unwrap();
            let mut last = s.norm_sqr();
            for k in 1..=40 {
                let t = 0.25 * k as f64;
                let n = evolve_single(&s, t, &ev, &m).unwrap().norm_sqr();
                prop_assert!(n <= last + 1e-12);
                last = n;
            }
        }
    }
}
