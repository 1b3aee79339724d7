//! The antisymmetric two-kaon state and its joint probabilities.
//!
//! Two families of probabilities live here. Projection probabilities are
//! exact inner products on the pair state. Decay-channel probabilities are
//! the equal-time leading-order expressions in the amplitude ratios r₀₀,
//! r₊₋ and the ΔS = ΔQ violation parameter x.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::kaon::{evolve_single, mass_eigenstates, EvolutionParams, FlavorState, MixingParams};
use crate::sampling::sample_counts;
use crate::{Error, Result, NORM_TOL};

type Amplitudes = [[Complex64; 2]; 2];

/// Two-kaon state on {K⁰, K̄⁰} ⊗ {K⁰, K̄⁰}; index 0 is K⁰, index 1 is K̄⁰.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairState {
    amplitudes: Amplitudes,
    mixing: MixingParams,
}

/// (|K⁰⟩|K̄⁰⟩ − |K̄⁰⟩|K⁰⟩)/√2
pub fn make_pair(m: &MixingParams) -> PairState {
    let z = Complex64::new(0.0, 0.0);
    let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
    PairState {
        amplitudes: [[z, s], [-s, z]],
        mixing: *m,
    }
}

impl PairState {
    pub fn amplitudes(&self) -> &Amplitudes {
        &self.amplitudes
    }

    pub fn mixing(&self) -> &MixingParams {
        &self.mixing
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().flatten().map(|a| a.norm_sqr()).sum()
    }

    /// Exchanges the two particles.
    pub fn swapped(&self) -> Self {
        let a = &self.amplitudes;
        Self {
            amplitudes: [[a[0][0], a[1][0]], [a[0][1], a[1][1]]],
            mixing: self.mixing,
        }
    }

    pub fn is_antisymmetric(&self) -> bool {
        let a = &self.amplitudes;
        (0..2).all(|i| (0..2).all(|j| (a[i][j] + a[j][i]).norm() <= NORM_TOL))
    }

    /// Coefficients `c[X][Y]` of the expansion on |X⟩|Y⟩ with X, Y ∈ {K_S, K_L}
    /// (index 0 = K_S, 1 = K_L).
    pub fn mass_basis_amplitudes(&self) -> Result<Amplitudes> {
        let (ks, kl) = mass_eigenstates(&self.mixing);
        // columns of b are K_S and K_L
        let b = [[ks.k0, kl.k0], [ks.k0bar, kl.k0bar]];
        let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
        if det.norm() < 1e-14 {
            return Err(Error::Domain("mass basis is degenerate".into()));
        }
        let inv = [
            [b[1][1] / det, -b[0][1] / det],
            [-b[1][0] / det, b[0][0] / det],
        ];
        let a = &self.amplitudes;
        let mut c = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (x, row) in c.iter_mut().enumerate() {
            for (y, cell) in row.iter_mut().enumerate() {
                for i in 0..2 {
                    for j in 0..2 {
                        *cell += inv[x][i] * a[i][j] * inv[y][j];
                    }
                }
            }
        }
        Ok(c)
    }

    /// Both particles evolved for the same time `t`. Not renormalized.
    pub fn evolve(&self, t: f64, ev: &EvolutionParams) -> Result<Self> {
        let basis = [FlavorState::k0_state(), FlavorState::k0bar_state()];
        let evolved: Vec<FlavorState> = basis
            .iter()
            .map(|s| evolve_single(s, t, ev, &self.mixing))
            .collect::<Result<_>>()?;
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, ei) in evolved.iter().enumerate() {
            for (j, ej) in evolved.iter().enumerate() {
                let amp = self.amplitudes[i][j];
                let (ci, cj) = (ei.components(), ej.components());
                for (k, cik) in ci.iter().enumerate() {
                    for (l, cjl) in cj.iter().enumerate() {
                        out[k][l] += amp * cik * cjl;
                    }
                }
            }
        }
        Ok(Self {
            amplitudes: out,
            mixing: self.mixing,
        })
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Domain("cannot normalize a null pair state".into()));
        }
        let mut amplitudes = self.amplitudes;
        amplitudes.iter_mut().flatten().for_each(|a| *a /= n);
        Ok(Self {
            amplitudes,
            mixing: self.mixing,
        })
    }

    /// Reduced density matrix of particle 1 (side = 1) or 2 (side = 2).
    pub fn reduced_density(&self, side: u8) -> Result<[[Complex64; 2]; 2]> {
        if side != 1 && side != 2 {
            return Err(Error::InvalidInput(format!("no side {side}")));
        }
        let a = &self.amplitudes;
        let mut rho = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in rho.iter_mut().enumerate() {
            for (k, cell) in row.iter_mut().enumerate() {
                *cell = (0..2)
                    .map(|j| {
                        if side == 1 {
                            a[i][j] * a[k][j].conj()
                        } else {
                            a[j][i] * a[j][k].conj()
                        }
                    })
                    .sum();
            }
        }
        Ok(rho)
    }
}

/// |(⟨f1|⊗⟨f2|)|pair⟩|²
pub fn joint_projection_probability(
    pair: &PairState,
    f1: &FlavorState,
    f2: &FlavorState,
) -> Result<f64> {
    f1.require_normalized()?;
    f2.require_normalized()?;
    Ok(joint_amplitude(pair, f1, f2).norm_sqr())
}

fn joint_amplitude(pair: &PairState, f1: &FlavorState, f2: &FlavorState) -> Complex64 {
    let (c1, c2) = (f1.components(), f2.components());
    let mut amp = Complex64::new(0.0, 0.0);
    for (i, x) in c1.iter().enumerate() {
        for (j, y) in c2.iter().enumerate() {
            amp += x.conj() * y.conj() * pair.amplitudes[i][j];
        }
    }
    amp
}

/// Probability that particle `side` is found in `f` with no selection on
/// the other particle.
pub fn marginal_projection_probability(pair: &PairState, side: u8, f: &FlavorState) -> Result<f64> {
    f.require_normalized()?;
    let rho = pair.reduced_density(side)?;
    let c = f.components();
    let mut v = Complex64::new(0.0, 0.0);
    for i in 0..2 {
        for k in 0..2 {
            v += c[i].conj() * rho[i][k] * c[k];
        }
    }
    Ok(v.re)
}

/// Samples `n` outcome pairs for measurements in the orthonormal bases
/// `basis1` (particle 1) and `basis2` (particle 2). `counts[a][b]` is the
/// number of draws with outcome `a` on side 1 and `b` on side 2.
pub fn sample_projection_outcomes(
    pair: &PairState,
    basis1: &[FlavorState; 2],
    basis2: &[FlavorState; 2],
    n: u64,
    seed: u64,
) -> Result<[[u64; 2]; 2]> {
    for (b, name) in [(basis1, "basis1"), (basis2, "basis2")] {
        b[0].require_normalized()?;
        b[1].require_normalized()?;
        if b[0].inner(&b[1]).norm() > 1e-9 {
            return Err(Error::InvalidInput(format!("{name} is not orthonormal")));
        }
    }
    let mut probs = Vec::with_capacity(4);
    for f1 in basis1 {
        for f2 in basis2 {
            probs.push(joint_projection_probability(pair, f1, f2)?);
        }
    }
    let counts = sample_counts(&probs, n, seed)?;
    Ok([[counts[0], counts[1]], [counts[2], counts[3]]])
}

/// Decay channels observable on one kaon. `NoSelection` is the "no
/// selection" marker of the Clauser-Horne singles terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelId {
    /// π⁻ l⁺ ν
    SemileptonicPlus,
    /// π⁺ l⁻ ν̄
    SemileptonicMinus,
    /// π⁰ π⁰
    TwoPiZero,
    /// π⁺ π⁻
    PiPlusPiMinus,
    /// Everything not listed.
    Other,
    #[serde(rename = "none")]
    NoSelection,
}

impl ChannelId {
    pub const ALL: [ChannelId; 6] = [
        ChannelId::SemileptonicPlus,
        ChannelId::SemileptonicMinus,
        ChannelId::TwoPiZero,
        ChannelId::PiPlusPiMinus,
        ChannelId::Other,
        ChannelId::NoSelection,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ChannelId::SemileptonicPlus => "sl+",
            ChannelId::SemileptonicMinus => "sl-",
            ChannelId::TwoPiZero => "2pi0",
            ChannelId::PiPlusPiMinus => "pipm",
            ChannelId::Other => "other",
            ChannelId::NoSelection => "none",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.label() == s)
    }

    /// Image under the K⁰ ↔ K̄⁰ relabeling.
    pub fn flavor_conjugate(&self) -> Self {
        match self {
            ChannelId::SemileptonicPlus => ChannelId::SemileptonicMinus,
            ChannelId::SemileptonicMinus => ChannelId::SemileptonicPlus,
            c => *c,
        }
    }

    fn is_semileptonic(&self) -> bool {
        matches!(
            self,
            ChannelId::SemileptonicPlus | ChannelId::SemileptonicMinus
        )
    }

    fn is_two_pion(&self) -> bool {
        matches!(self, ChannelId::TwoPiZero | ChannelId::PiPlusPiMinus)
    }
}

/// Amplitude ratios entering the decay-channel probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayChannelParams {
    pub r_00: Complex64,
    pub r_plusminus: Complex64,
    /// ΔS = ΔQ violation
    pub x: Complex64,
    pub eps_l: Complex64,
    pub eps: Complex64,
    pub eps_prime: Complex64,
}

impl DecayChannelParams {
    pub fn with_x(mut self, x: Complex64) -> Self {
        self.x = x;
        self
    }

    /// Parameters seen after exchanging K⁰ and K̄⁰: K_S changes sign, so the
    /// two-pion ratios flip sign.
    pub fn flavor_relabeled(&self) -> Self {
        Self {
            r_00: -self.r_00,
            r_plusminus: -self.r_plusminus,
            ..*self
        }
    }
}

/// r₊₋ = ε − ε_L + ε′, r₀₀ = ε − ε_L − 2ε′, x = 0.
pub fn r_params_from_eps(
    eps: Complex64,
    eps_prime: Complex64,
    eps_l: Complex64,
) -> DecayChannelParams {
    DecayChannelParams {
        r_00: eps - eps_l - 2.0 * eps_prime,
        r_plusminus: eps - eps_l + eps_prime,
        x: Complex64::new(0.0, 0.0),
        eps_l,
        eps,
        eps_prime,
    }
}

fn check_probability(p: f64) -> Result<f64> {
    if !(-NORM_TOL..=1.0).contains(&p) {
        return Err(Error::UnphysicalParameters(p));
    }
    Ok(p)
}

fn pair_damping(t: f64, ev: &EvolutionParams) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Ok((-(ev.gamma_l() + ev.gamma_s()) * t).exp())
}

/// Equal-time joint decay probability for the three channel pairs
///
/// * (π⁻l⁺ν, 2π⁰):  ¼ e^{−(γ_L+γ_S)t} [1 − 2 Re r₀₀ − 2 Re x]
/// * (π⁻l⁺ν, π⁺π⁻): ¼ e^{−(γ_L+γ_S)t} [1 − 2 Re r₊₋ − 2 Re x]
/// * (2π⁰, π⁺π⁻):   ½ e^{−(γ_L+γ_S)t} |r₊₋ − r₀₀|²
///
/// At equal times the pair probability is symmetric under exchanging the
/// particles, so either order is accepted.
pub fn joint_decay_probability(
    c1: ChannelId,
    c2: ChannelId,
    t: f64,
    d: &DecayChannelParams,
    ev: &EvolutionParams,
) -> Result<f64> {
    use ChannelId::*;
    let damping = pair_damping(t, ev)?;
    let value = match (c1, c2) {
        (SemileptonicPlus, TwoPiZero) | (TwoPiZero, SemileptonicPlus) => {
            0.25 * damping * (1.0 - 2.0 * d.r_00.re - 2.0 * d.x.re)
        }
        (SemileptonicPlus, PiPlusPiMinus) | (PiPlusPiMinus, SemileptonicPlus) => {
            0.25 * damping * (1.0 - 2.0 * d.r_plusminus.re - 2.0 * d.x.re)
        }
        (TwoPiZero, PiPlusPiMinus) | (PiPlusPiMinus, TwoPiZero) => {
            0.5 * damping * (d.r_plusminus - d.r_00).norm_sqr()
        }
        _ => return Err(Error::UnsupportedCombination(c1, c2)),
    };
    check_probability(value)
}

/// Complete outcome partition used on the unselected side of a singles term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinglesPartition {
    channels: Vec<ChannelId>,
}

impl SinglesPartition {
    pub fn new(channels: Vec<ChannelId>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidInput("empty partition".into()));
        }
        if channels.contains(&ChannelId::NoSelection) {
            return Err(Error::InvalidInput(
                "'none' is not an outcome and cannot be a partition cell".into(),
            ));
        }
        let mut sorted = channels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != channels.len() {
            return Err(Error::InvalidInput("duplicate partition cell".into()));
        }
        Ok(Self { channels })
    }

    pub fn channels(&self) -> &[ChannelId] {
        &self.channels
    }
}

impl Default for SinglesPartition {
    /// {2π⁰, π⁺π⁻, π⁻l⁺ν, π⁺l⁻ν̄, other}
    fn default() -> Self {
        Self {
            channels: vec![
                ChannelId::TwoPiZero,
                ChannelId::PiPlusPiMinus,
                ChannelId::SemileptonicPlus,
                ChannelId::SemileptonicMinus,
                ChannelId::Other,
            ],
        }
    }
}

/// Entry of the equal-time channel table used for marginalisation.
///
/// Beyond the three pairs of [`joint_decay_probability`]:
/// identical channels vanish (antisymmetry); π⁺l⁻ν̄ rows are the K⁰ ↔ K̄⁰
/// images of the π⁻l⁺ν rows; (π⁻l⁺ν, π⁺l⁻ν̄) is ½ e^{−(γ_L+γ_S)t} |1 − |x|²|²;
/// `Other` carries no modelled amplitude.
pub fn channel_table_entry(
    c1: ChannelId,
    c2: ChannelId,
    t: f64,
    d: &DecayChannelParams,
    ev: &EvolutionParams,
) -> Result<f64> {
    use ChannelId::*;
    let damping = pair_damping(t, ev)?;
    if c1 == NoSelection || c2 == NoSelection {
        return Err(Error::UnsupportedCombination(c1, c2));
    }
    if c1 == c2 || c1 == Other || c2 == Other {
        return Ok(0.0);
    }
    match (c1, c2) {
        (SemileptonicMinus, c) | (c, SemileptonicMinus) if c.is_two_pion() => {
            joint_decay_probability(SemileptonicPlus, c, t, &d.flavor_relabeled(), ev)
        }
        (a, b) if a.is_semileptonic() && b.is_semileptonic() => {
            let v = 0.5 * damping * (1.0 - d.x.norm_sqr()).powi(2);
            check_probability(v)
        }
        _ => joint_decay_probability(c1, c2, t, d, ev),
    }
}

/// Probability of channel `c` on one side with no selection on the other,
/// obtained by summing the channel table over `partition`. `NoSelection`
/// on both sides is the certain event.
pub fn singles_probability(
    c: ChannelId,
    t: f64,
    d: &DecayChannelParams,
    ev: &EvolutionParams,
    partition: &SinglesPartition,
) -> Result<f64> {
    pair_damping(t, ev)?;
    if c == ChannelId::NoSelection {
        return Ok(1.0);
    }
    let mut total = 0.0;
    for g in partition.channels() {
        total += channel_table_entry(c, *g, t, d, ev)?;
    }
    check_probability(total)
}
