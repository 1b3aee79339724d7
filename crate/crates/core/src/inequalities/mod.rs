//! Inequality chains linking Bell-type bounds to CP-violation parameters.
//!
//! Every report uses `margin = rhs − lhs`, so a negative margin always means
//! the local-realistic bound is violated. Reduced inequalities (the ε′ bound,
//! the ε bound and |p| ≤ |q|) always carry the assumptions that went into
//! their derivation; they are not assumption-free tests of local realism.

mod efficiency;

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::kaon::{cp_eigenstates, mass_eigenstates, FlavorState, MixingParams};
use crate::pair::{joint_projection_probability, make_pair};
use crate::{Error, Result};

pub use efficiency::{
    ch_value, efficiency_scan, efficiency_threshold, max_ch_value, outcome_distribution,
    single_detection_probability, EfficiencyScanResult, BISECTION_TOL, GRID_POINTS,
};

pub mod notes {
    pub const SQM_AMPLITUDES: &str =
        "reduction uses quantum-mechanical amplitude relations that a general local hidden-variable theory need not reproduce";
    pub const STOCHASTIC_INDEPENDENCE: &str =
        "derivation assumes the decays of the two kaons are stochastically independent; a deterministic theory may fix the decay channel through the hidden variables";
    pub const UNCORRELATED_DATA: &str =
        "parameter values measured on uncorrelated kaons need not equal those of entangled pairs, and such measurements are not space-like separated";
    pub const UNPHYSICAL_CP_STATES: &str =
        "probabilities involving CP eigenstates K0+/K0- refer to states that are not physical when CP is broken";
    pub const PHASE_CONVENTION: &str =
        "reduction to the epsilon bound relies on an additional hypothesis on phases";
    pub const CHANNEL_SELECTED_ESTIMATES: &str =
        "|p| and |q| extracted from specific decay channels need not describe an unbiased hidden-variable sample";
    pub const LOCALITY: &str =
        "values not obtained from space-like separated measurements on entangled pairs leave the locality loophole open";
    pub const NORMALIZATION_CORRECTION: &str =
        "joint probabilities normalized by (|p|^2 + |q|^2), matching the inner products on the pair state";
    pub const CH_SIGN_PATTERN: &str =
        "evaluated with the printed sign pattern P(f1,f2) - P(f1,f4) + P(f3,f2) + P(f3,f4) <= P(f3,-) + P(-,f2), i.e. the Clauser-Horne form with (a, b, a', b') = (f1, f2, f3, f4)";
    pub const FAIR_SAMPLING: &str =
        "a test on detected events only requires the fair-sampling hypothesis unless the total detection efficiency exceeds the loophole-free threshold";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub violated: bool,
    pub inputs_echo: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
    pub assumption_notes: Vec<String>,
}

impl InequalityReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin,
            violated: margin < 0.0,
            inputs_echo: BTreeMap::new(),
            details: BTreeMap::new(),
            assumption_notes: Vec::new(),
        }
    }

    pub fn echo(mut self, key: &str, value: f64) -> Self {
        self.inputs_echo.insert(key.to_owned(), value);
        self
    }

    fn echo_complex(self, key: &str, z: Complex64) -> Self {
        self.echo(&format!("{key}_re"), z.re)
            .echo(&format!("{key}_im"), z.im)
    }

    pub fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_owned(), value);
        self
    }

    pub fn note(mut self, note: &str) -> Self {
        self.assumption_notes.push(note.to_owned());
        self
    }
}

/// The six probabilities of a Clauser-Horne expression. `p3_` is
/// P(f3; −) and `p_2` is P(−; f2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChTerms {
    pub p12: f64,
    pub p14: f64,
    pub p32: f64,
    pub p34: f64,
    pub p3_: f64,
    pub p_2: f64,
}

impl ChTerms {
    fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("p12", self.p12),
            ("p14", self.p14),
            ("p32", self.p32),
            ("p34", self.p34),
            ("p3_", self.p3_),
            ("p_2", self.p_2),
        ]
    }
}

/// P(f1;f2) − P(f1;f4) + P(f3;f2) + P(f3;f4) ≤ P(f3;−) + P(−;f2).
///
/// Margins within summation round-off of zero are reported as exactly zero
/// (boundary), so saturating local models are never flagged by an ulp.
pub fn ch_evaluate(terms: &ChTerms) -> Result<InequalityReport> {
    for (name, value) in terms.named() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ProbabilityOutOfRange {
                name: name.to_owned(),
                value,
            });
        }
    }
    let lhs = terms.p12 - terms.p14 + terms.p32 + terms.p34;
    let rhs = terms.p3_ + terms.p_2;
    let mut report = InequalityReport::new("clauser_horne", lhs, rhs);
    let scale: f64 = terms.named().iter().map(|(_, v)| v.abs()).sum();
    if report.margin.abs() <= 64.0 * f64::EPSILON * scale {
        report.margin = 0.0;
        report.violated = false;
    }
    let mut report = report.note(notes::CH_SIGN_PATTERN);
    for (name, value) in terms.named() {
        report = report.echo(name, value);
    }
    Ok(report)
}

/// |Re ε′| ≤ 3|ε′|²
pub fn epsilon_prime_test(eps_prime: Complex64) -> InequalityReport {
    InequalityReport::new(
        "epsilon_prime_bound",
        eps_prime.re.abs(),
        3.0 * eps_prime.norm_sqr(),
    )
    .echo_complex("eps_prime", eps_prime)
    .note(notes::STOCHASTIC_INDEPENDENCE)
    .note(notes::SQM_AMPLITUDES)
    .note(notes::UNPHYSICAL_CP_STATES)
    .note(notes::UNCORRELATED_DATA)
}

/// Re ε ≤ |ε|²
pub fn epsilon_test(eps: Complex64) -> InequalityReport {
    let rhs = eps.norm_sqr();
    let mut report = InequalityReport::new("epsilon_bound", eps.re, rhs)
        .echo_complex("eps", eps)
        .note(notes::PHASE_CONVENTION)
        .note(notes::SQM_AMPLITUDES)
        .note(notes::UNPHYSICAL_CP_STATES);
    if rhs > 0.0 {
        report = report.detail("lhs_over_rhs", eps.re / rhs);
    }
    report
}

/// The three joint probabilities entering the K_S / K̄⁰ / K₊ Bell inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BghProbabilities {
    /// P(K_S, K̄⁰) = |p|²/(2(|p|²+|q|²))
    pub p_s_k0bar: f64,
    /// P(K_S, K̄⁰₊) = |p e^{iα} − q|²/(4(|p|²+|q|²))
    pub p_s_kplusbar: f64,
    /// P(K₊, K̄⁰) = 1/4
    pub p_plus_k0bar: f64,
}

pub fn bgh_probabilities(m: &MixingParams) -> BghProbabilities {
    let (p, q) = (m.p(), m.q());
    let n2 = m.norm_sqr();
    let phase = Complex64::from_polar(1.0, m.alpha());
    BghProbabilities {
        p_s_k0bar: p.norm_sqr() / (2.0 * n2),
        p_s_kplusbar: (p * phase - q).norm_sqr() / (4.0 * n2),
        p_plus_k0bar: 0.25,
    }
}

/// Left and right side of P(K_S, F) ≤ P(K_S, K₊) + P(K₊, F) on the pair
/// state, with F = K̄⁰ or, when `swap_flavor`, F = K⁰.
fn bell_form_on_pair(m: &MixingParams, swap_flavor: bool) -> Result<(f64, f64)> {
    let pair = make_pair(m);
    let (ks, _) = mass_eigenstates(m);
    let (kplus, _) = cp_eigenstates(m.alpha());
    let flavor = if swap_flavor {
        FlavorState::k0_state()
    } else {
        FlavorState::k0bar_state()
    };
    let lhs = joint_projection_probability(&pair, &ks, &flavor)?;
    let rhs = joint_projection_probability(&pair, &ks, &kplus)?
        + joint_projection_probability(&pair, &kplus, &flavor)?;
    Ok((lhs, rhs))
}

/// Evaluates the K_S / K̄⁰ / K₊ Bell inequality and its phase-maximised
/// reduction |p| ≤ |q| (|q| ≤ |p| with `swap_flavor`).
///
/// The report's lhs/rhs are the reduced form. `details` carries the
/// probability form at the configured α, the intermediate phase form
/// Re(e^{iα} p q̄) ≤ |q|² (≤ |p|² when swapped), the maximising α and the
/// probability-form margin there.
pub fn bgh_test(m: &MixingParams, swap_flavor: bool) -> Result<InequalityReport> {
    let (p, q) = (m.p(), m.q());
    let (abs_p, abs_q) = (p.norm(), q.norm());
    let (lhs, rhs, name) = if swap_flavor {
        (abs_q, abs_p, "q_le_p")
    } else {
        (abs_p, abs_q, "p_le_q")
    };

    let (prob_lhs, prob_rhs) = bell_form_on_pair(m, swap_flavor)?;
    let pq = p * q.conj();
    let phase_lhs = (Complex64::from_polar(1.0, m.alpha()) * pq).re;
    let phase_rhs = if swap_flavor {
        p.norm_sqr()
    } else {
        q.norm_sqr()
    };
    let alpha_max = -pq.arg();
    let (max_lhs, max_rhs) = bell_form_on_pair(&m.with_alpha(alpha_max), swap_flavor)?;

    let report = InequalityReport::new(name, lhs, rhs)
        .echo_complex("eps", m.epsilon())
        .echo("alpha", m.alpha())
        .detail("probability_form_lhs", prob_lhs)
        .detail("probability_form_rhs", prob_rhs)
        .detail("probability_form_margin", prob_rhs - prob_lhs)
        .detail("phase_form_lhs", phase_lhs)
        .detail("phase_form_rhs", phase_rhs)
        .detail("phase_form_max_lhs", abs_p * abs_q)
        .detail("alpha_at_max", alpha_max)
        .detail("probability_form_margin_at_max", max_rhs - max_lhs)
        .note(notes::SQM_AMPLITUDES)
        .note(notes::UNPHYSICAL_CP_STATES)
        .note(notes::CHANNEL_SELECTED_ESTIMATES)
        .note(notes::LOCALITY)
        .note(notes::NORMALIZATION_CORRECTION);
    Ok(report)
}

/// Runs both orientations; `|p| = |q|` is contradicted iff either is violated.
pub fn bgh_contradiction(m: &MixingParams) -> Result<(InequalityReport, InequalityReport, bool)> {
    let direct = bgh_test(m, false)?;
    let swapped = bgh_test(m, true)?;
    let contradicted = direct.violated || swapped.violated;
    Ok((direct, swapped, contradicted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kaon::mixing_from_epsilon;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn paper_eps() -> Complex64 {
        crate::polar_deg(2.284e-3, 43.52)
    }

    fn terms(v: [f64; 6]) -> ChTerms {
        ChTerms {
            p12: v[0],
            p14: v[1],
            p32: v[2],
            p34: v[3],
            p3_: v[4],
            p_2: v[5],
        }
    }

    #[test]
    fn ch_examples() {
        let r = ch_evaluate(&terms([0.0; 6])).unwrap();
        assert_eq!((r.lhs, r.rhs, r.violated), (0.0, 0.0, false));
        let r = ch_evaluate(&terms([0.25, 0.0, 0.25, 0.25, 0.25, 0.25])).unwrap();
        assert_eq!(r.lhs, 0.75);
        assert_eq!(r.rhs, 0.5);
        assert!(r.violated);
        assert!(r.margin < 0.0);
        assert!(!r.assumption_notes.is_empty());
    }

    #[test]
    fn ch_rejects_out_of_range() {
        let err = ch_evaluate(&terms([0.1, 0.1, 1.2, 0.0, 0.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::ProbabilityOutOfRange { ref name, .. } if name == "p32"));
        assert!(ch_evaluate(&terms([0.1, -0.01, 0.0, 0.0, 0.0, 0.0])).is_err());
        assert!(ch_evaluate(&terms([f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0])).is_err());
    }

    // Every local deterministic assignment: a, a', b, b' ∈ {0, 1}.
    fn deterministic_terms() -> Vec<ChTerms> {
        let mut out = Vec::new();
        for bits in 0..16u8 {
            let bit = |k: u8| ((bits >> k) & 1) as f64;
            let (a, a2, b, b2) = (bit(0), bit(1), bit(2), bit(3));
            out.push(terms([a * b, a * b2, a2 * b, a2 * b2, a2, b]));
        }
        out
    }

    #[test]
    fn ch_sound_for_deterministic_assignments() {
        for t in deterministic_terms() {
            assert!(!ch_evaluate(&t).unwrap().violated, "{t:?}");
        }
    }

    #[test]
    fn ch_sound_for_factorizable_distributions() {
        // product of independent marginals, the deterministic-strategy oracle
        // above covers them by convexity; spot check a few
        for (pa, pa2, pb, pb2) in [
            (0.3, 0.9, 0.5, 0.1),
            (1.0, 1.0, 1.0, 1.0),
            (0.5, 0.5, 0.5, 0.5),
        ] {
            let r = ch_evaluate(&terms([pa * pb, pa * pb2, pa2 * pb, pa2 * pb2, pa2, pb])).unwrap();
            assert!(!r.violated);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn ch_sound_for_mixtures(raw in proptest::collection::vec(0.0..1.0f64, 16)) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let det = deterministic_terms();
            let mut v = [0.0; 6];
            for (w, t) in raw.iter().zip(&det) {
                let w = w / total;
                v[0] += w * t.p12; v[1] += w * t.p14; v[2] += w * t.p32;
                v[3] += w * t.p34; v[4] += w * t.p3_; v[5] += w * t.p_2;
            }
            let v = v.map(|x: f64| x.clamp(0.0, 1.0));
            prop_assert!(!ch_evaluate(&terms(v)).unwrap().violated);
        }

        #[test]
        fn bgh_probabilities_match_pair(r in 0.0..0.05f64, phi in -3.2..3.2f64, alpha in -3.2..3.2f64) {
            let m = mixing_from_epsilon(Complex64::from_polar(r, phi), alpha).unwrap();
            let closed = bgh_probabilities(&m);
            let pair = make_pair(&m);
            let (ks, _) = mass_eigenstates(&m);
            let (kp, _) = cp_eigenstates(alpha);
            let k0bar = FlavorState::k0bar_state();
            prop_assert!((closed.p_s_k0bar - joint_projection_probability(&pair, &ks, &k0bar).unwrap()).abs() <= 1e-12);
            prop_assert!((closed.p_s_kplusbar - joint_projection_probability(&pair, &ks, &kp).unwrap()).abs() <= 1e-12);
            prop_assert!((closed.p_plus_k0bar - joint_projection_probability(&pair, &kp, &k0bar).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn reduction_consistency(r in 0.0..0.05f64, phi in -3.2..3.2f64, swap in any::<bool>()) {
            let m = mixing_from_epsilon(Complex64::from_polar(r, phi), 0.0).unwrap();
            let report = bgh_test(&m, swap).unwrap();
            let at_max = report.details["probability_form_margin_at_max"];
            let reduced = report.rhs - report.lhs;
            // margin at the maximising α is |q|(|q| − |p|)/(2(|p|²+|q|²))
            let expected = if swap {
                m.p().norm() * reduced / (2.0 * m.norm_sqr())
            } else {
                m.q().norm() * reduced / (2.0 * m.norm_sqr())
            };
            prop_assert!((at_max - expected).abs() <= 1e-12);
            if reduced.abs() > 1e-12 {
                prop_assert_eq!(at_max.signum(), reduced.signum());
            }
        }
    }

    #[test]
    fn bgh_probability_examples() {
        let m = mixing_from_epsilon(c(0.0, 0.0), 0.0).unwrap();
        let b = bgh_probabilities(&m);
        assert_eq!(b.p_s_k0bar, 0.25);
        assert_eq!(b.p_s_kplusbar, 0.0);
        assert_eq!(b.p_plus_k0bar, 0.25);
        let m = mixing_from_epsilon(paper_eps(), 1.1).unwrap();
        assert_eq!(bgh_probabilities(&m).p_plus_k0bar, 0.25);
    }

    #[test]
    fn bgh_examples() {
        let zero = mixing_from_epsilon(c(0.0, 0.0), 0.0).unwrap();
        for swap in [false, true] {
            let r = bgh_test(&zero, swap).unwrap();
            assert_eq!(r.margin, 0.0);
            assert!(!r.violated);
        }
        let m = mixing_from_epsilon(paper_eps(), 0.0).unwrap();
        let r = bgh_test(&m, false).unwrap();
        assert!(r.violated);
        // |1 + ε| − |1 − ε| computed independently in double precision
        let oracle = (c(1.0, 0.0) + paper_eps()).norm() - (c(1.0, 0.0) - paper_eps()).norm();
        assert!((r.margin + oracle).abs() < 1e-15);
        assert!((r.margin + 3.31240822412715e-3).abs() < 1e-10);
        assert!(!bgh_test(&m, true).unwrap().violated);
        let (_, _, contradicted) = bgh_contradiction(&m).unwrap();
        assert!(contradicted);

        let imag = mixing_from_epsilon(c(0.0, 0.02), 0.0).unwrap();
        let (d, s, contradicted) = bgh_contradiction(&imag).unwrap();
        assert_eq!((d.margin, s.margin), (0.0, 0.0));
        assert!(!contradicted);
    }

    #[test]
    fn bgh_phase_form_at_configured_alpha() {
        let m = mixing_from_epsilon(c(0.01, 0.02), 0.6).unwrap();
        let r = bgh_test(&m, false).unwrap();
        // probability form ⇔ phase form after multiplying by 2(|p|²+|q|²)
        let prob_margin = r.details["probability_form_margin"];
        let phase_margin = r.details["phase_form_rhs"] - r.details["phase_form_lhs"];
        assert!((prob_margin - phase_margin / (2.0 * m.norm_sqr())).abs() < 1e-14);
    }

    #[test]
    fn epsilon_examples() {
        let r = epsilon_test(c(0.0, 0.0));
        assert_eq!((r.lhs, r.rhs, r.violated), (0.0, 0.0, false));
        let r = epsilon_test(paper_eps());
        assert!((r.lhs - 1.6562061604918e-3).abs() < 1e-15);
        assert!((r.rhs - 5.216656e-6).abs() < 1e-15);
        assert!(r.violated);
        let ratio = r.details["lhs_over_rhs"];
        assert!((ratio - 317.48425820906).abs() < 1e-8);
        let r = epsilon_test(c(-1e-3, 0.0));
        assert!(!r.violated);
        assert!(!r.assumption_notes.is_empty());
    }

    #[test]
    fn epsilon_prime_examples() {
        let r = epsilon_prime_test(c(0.0, 0.0));
        assert!(!r.violated);
        assert_eq!(r.margin, 0.0);
        let r = epsilon_prime_test(c(0.0, 1e-3));
        assert_eq!(r.lhs, 0.0);
        assert!((r.rhs - 3e-6).abs() < 1e-20);
        assert!(!r.violated);
        let r = epsilon_prime_test(c(3.8e-6, 0.0));
        assert!(r.violated);
        assert!((r.rhs - 4.332e-11).abs() < 1e-24);
        assert!(r.rhs / r.lhs < 1e-4);
        assert!(r
            .assumption_notes
            .iter()
            .any(|n| n.contains("stochastically independent")));
    }
}
