//! Explicit finite local-hidden-variable models.
//!
//! A model is a weighted list of hidden-variable values λ. Each side owns a
//! response table `responses[λ][setting]`, so the outcome on one side can only
//! depend on λ and that side's own setting. Statistics are exact weighted
//! sums over λ; sampling draws λ with a seeded generator.
//!
//! The constructions in [`detection`] and [`channel`] are demonstrations
//! that such models are logically possible. They make no claim about the
//! underlying dynamics.

pub mod channel;
pub mod detection;
mod simplex;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::inequalities::{ch_evaluate, notes, ChTerms, InequalityReport};
use crate::pair::ChannelId;
use crate::sampling::sample_counts;
use crate::{Error, Result, NORM_TOL};

pub use channel::{
    build_channel_dependent_model, flavor_estimates, full_ensemble_asymmetry, observed_branching,
    semileptonic_asymmetry, BranchingTargets, ChannelModelOutcome, FlavorEstimates, TimeBuckets,
};
pub use detection::{build_detection_loophole_model, DetectionModelOutcome, DetectionTarget};

/// Response of one side for one λ and one setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    NoDetect,
    /// Detected with dichotomic result "+" (the counted event in CH terms).
    Plus,
    /// Detected with dichotomic result "−".
    Minus,
    /// Detected decay into `channel` within decay-time bucket `bucket`.
    Decay {
        channel: ChannelId,
        bucket: u16,
    },
}

impl Outcome {
    pub fn is_detected(&self) -> bool {
        !matches!(self, Outcome::NoDetect)
    }
}

/// Settings and deterministic responses of one side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideTable {
    pub settings: Vec<String>,
    /// `responses[λ][setting]`
    pub responses: Vec<Vec<Outcome>>,
}

impl SideTable {
    fn setting_index(&self, name: &str) -> Result<usize> {
        self.settings
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::UnknownSetting(name.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMetadata {
    pub construction: String,
    #[serde(default)]
    pub notes: Vec<String>,
    /// Hidden flavor content per λ (+1 K⁰-like, −1 K̄⁰-like), when modelled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flavor_tags: Option<Vec<i8>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRepr {
    lambdas: Vec<String>,
    weights: Vec<f64>,
    side1: SideTable,
    side2: SideTable,
    #[serde(default)]
    metadata: ModelMetadata,
}

/// Finite mixture of deterministic local strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr")]
pub struct HiddenVariableModel {
    lambdas: Vec<String>,
    weights: Vec<f64>,
    side1: SideTable,
    side2: SideTable,
    metadata: ModelMetadata,
}

impl TryFrom<ModelRepr> for HiddenVariableModel {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<Self> {
        HiddenVariableModel::new(r.lambdas, r.weights, r.side1, r.side2, r.metadata)
    }
}

impl HiddenVariableModel {
    pub fn new(
        lambdas: Vec<String>,
        weights: Vec<f64>,
        side1: SideTable,
        side2: SideTable,
        metadata: ModelMetadata,
    ) -> Result<Self> {
        let n = lambdas.len();
        if n == 0 {
            return Err(Error::InvalidModel("no hidden-variable values".into()));
        }
        if weights.len() != n {
            return Err(Error::InvalidModel(format!(
                "{} weights for {n} hidden-variable values",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidModel(
                "weights must be finite and >= 0".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidModel(format!("weights sum to {total}")));
        }
        for (name, side) in [("side1", &side1), ("side2", &side2)] {
            if side.settings.is_empty() {
                return Err(Error::InvalidModel(format!("{name} declares no settings")));
            }
            let mut unique = side.settings.clone();
            unique.sort();
            unique.dedup();
            if unique.len() != side.settings.len() {
                return Err(Error::InvalidModel(format!(
                    "{name} has duplicate settings"
                )));
            }
            if side.responses.len() != n {
                return Err(Error::InvalidModel(format!(
                    "{name} has {} response rows for {n} hidden-variable values",
                    side.responses.len()
                )));
            }
            if let Some(row) = side
                .responses
                .iter()
                .find(|row| row.len() != side.settings.len())
            {
                return Err(Error::InvalidModel(format!(
                    "{name} response row has {} entries for {} settings",
                    row.len(),
                    side.settings.len()
                )));
            }
        }
        if let Some(tags) = &metadata.flavor_tags {
            if tags.len() != n || tags.iter().any(|t| *t != 1 && *t != -1) {
                return Err(Error::InvalidModel(
                    "flavor tags must be ±1, one per λ".into(),
                ));
            }
        }
        Ok(Self {
            lambdas,
            weights,
            side1,
            side2,
            metadata,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidModel(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    pub fn lambdas(&self) -> &[String] {
        &self.lambdas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn side1(&self) -> &SideTable {
        &self.side1
    }

    pub fn side2(&self) -> &SideTable {
        &self.side2
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    fn outcomes_for(&self, settings: &SettingsPair) -> Result<Vec<(Outcome, Outcome)>> {
        let i = self.side1.setting_index(&settings.side1)?;
        let j = self.side2.setting_index(&settings.side2)?;
        Ok((0..self.lambdas.len())
            .map(|l| (self.side1.responses[l][i], self.side2.responses[l][j]))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SettingsPair {
    pub side1: String,
    pub side2: String,
}

impl SettingsPair {
    pub fn new(side1: impl Into<String>, side2: impl Into<String>) -> Self {
        Self {
            side1: side1.into(),
            side2: side2.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointCell {
    pub side1: Outcome,
    pub side2: Outcome,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleCell {
    pub outcome: Outcome,
    pub probability: f64,
}

/// Exact outcome statistics of a model at one settings pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStatistics {
    pub settings: SettingsPair,
    pub full_joint: Vec<JointCell>,
    /// Joint distribution conditioned on both sides detecting.
    pub detected_joint: Vec<JointCell>,
    pub singles_side1: Vec<SingleCell>,
    pub singles_side2: Vec<SingleCell>,
    pub detected_fraction: f64,
}

fn cell_lookup(cells: &[JointCell], o1: Outcome, o2: Outcome) -> f64 {
    cells
        .iter()
        .find(|c| c.side1 == o1 && c.side2 == o2)
        .map_or(0.0, |c| c.probability)
}

impl EnsembleStatistics {
    pub fn joint(&self, o1: Outcome, o2: Outcome) -> f64 {
        cell_lookup(&self.full_joint, o1, o2)
    }

    pub fn detected(&self, o1: Outcome, o2: Outcome) -> f64 {
        cell_lookup(&self.detected_joint, o1, o2)
    }

    pub fn single(&self, side: u8, o: Outcome) -> f64 {
        let cells = if side == 1 {
            &self.singles_side1
        } else {
            &self.singles_side2
        };
        cells
            .iter()
            .find(|c| c.outcome == o)
            .map_or(0.0, |c| c.probability)
    }

    /// Marginal of the detected-subsample distribution on one side.
    pub fn detected_single(&self, side: u8, o: Outcome) -> f64 {
        self.detected_joint
            .iter()
            .filter(|c| {
                if side == 1 {
                    c.side1 == o
                } else {
                    c.side2 == o
                }
            })
            .map(|c| c.probability)
            .sum()
    }

    /// Probability that side `side` detects anything.
    pub fn detection_probability(&self, side: u8) -> f64 {
        let cells = if side == 1 {
            &self.singles_side1
        } else {
            &self.singles_side2
        };
        cells
            .iter()
            .filter(|c| c.outcome.is_detected())
            .map(|c| c.probability)
            .sum()
    }
}

/// Exact weighted aggregation over λ.
pub fn statistics(
    model: &HiddenVariableModel,
    settings: &SettingsPair,
) -> Result<EnsembleStatistics> {
    let outcomes = model.outcomes_for(settings)?;
    let mut joint: BTreeMap<(Outcome, Outcome), f64> = BTreeMap::new();
    let mut s1: BTreeMap<Outcome, f64> = BTreeMap::new();
    let mut s2: BTreeMap<Outcome, f64> = BTreeMap::new();
    for (&w, &(o1, o2)) in model.weights.iter().zip(&outcomes) {
        *joint.entry((o1, o2)).or_default() += w;
        *s1.entry(o1).or_default() += w;
        *s2.entry(o2).or_default() += w;
    }
    let detected_fraction: f64 = joint
        .iter()
        .filter(|((a, b), _)| a.is_detected() && b.is_detected())
        .map(|(_, p)| p)
        .sum();
    let detected_joint = if detected_fraction > 0.0 {
        joint
            .iter()
            .filter(|((a, b), _)| a.is_detected() && b.is_detected())
            .map(|(&(side1, side2), p)| JointCell {
                side1,
                side2,
                probability: p / detected_fraction,
            })
            .collect()
    } else {
        Vec::new()
    };
    let singles = |m: BTreeMap<Outcome, f64>| {
        m.into_iter()
            .map(|(outcome, probability)| SingleCell {
                outcome,
                probability,
            })
            .collect()
    };
    Ok(EnsembleStatistics {
        settings: settings.clone(),
        full_joint: joint
            .into_iter()
            .map(|((side1, side2), probability)| JointCell {
                side1,
                side2,
                probability,
            })
            .collect(),
        detected_joint,
        singles_side1: singles(s1),
        singles_side2: singles(s2),
        detected_fraction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountCell {
    pub side1: Outcome,
    pub side2: Outcome,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub settings: SettingsPair,
    pub n: u64,
    pub seed: u64,
    /// Cells with at least one draw, in outcome order.
    pub cells: Vec<CountCell>,
}

impl OutcomeCounts {
    pub fn count(&self, o1: Outcome, o2: Outcome) -> u64 {
        self.cells
            .iter()
            .find(|c| c.side1 == o1 && c.side2 == o2)
            .map_or(0, |c| c.count)
    }
}

/// `n` independent draws of λ followed by the deterministic responses.
/// Reproducible for a given seed, independent of the worker count.
pub fn sample(
    model: &HiddenVariableModel,
    settings: &SettingsPair,
    n: u64,
    seed: u64,
) -> Result<OutcomeCounts> {
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be >= 1".into()));
    }
    let outcomes = model.outcomes_for(settings)?;
    let per_lambda = sample_counts(&model.weights, n, seed)?;
    let mut cells: BTreeMap<(Outcome, Outcome), u64> = BTreeMap::new();
    for (count, pair) in per_lambda.into_iter().zip(outcomes) {
        if count > 0 {
            *cells.entry(pair).or_default() += count;
        }
    }
    Ok(OutcomeCounts {
        settings: settings.clone(),
        n,
        seed,
        cells: cells
            .into_iter()
            .map(|((side1, side2), count)| CountCell {
                side1,
                side2,
                count,
            })
            .collect(),
    })
}

/// Settings playing the roles f1 (side 1), f2 (side 2), f3 (side 1) and
/// f4 (side 2) in the Clauser-Horne expression. The counted event is
/// [`Outcome::Plus`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChAssignment {
    pub f1: String,
    pub f2: String,
    pub f3: String,
    pub f4: String,
}

impl ChAssignment {
    pub fn new(f1: &str, f2: &str, f3: &str, f4: &str) -> Self {
        Self {
            f1: f1.into(),
            f2: f2.into(),
            f3: f3.into(),
            f4: f4.into(),
        }
    }
}

struct ChStatistics {
    s12: EnsembleStatistics,
    s14: EnsembleStatistics,
    s32: EnsembleStatistics,
    s34: EnsembleStatistics,
}

fn ch_statistics(model: &HiddenVariableModel, a: &ChAssignment) -> Result<ChStatistics> {
    let st = |x: &str, y: &str| statistics(model, &SettingsPair::new(x, y));
    Ok(ChStatistics {
        s12: st(&a.f1, &a.f2)?,
        s14: st(&a.f1, &a.f4)?,
        s32: st(&a.f3, &a.f2)?,
        s34: st(&a.f3, &a.f4)?,
    })
}

fn clamp_unit(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// CH terms on the whole λ ensemble; undetected events are no-counts.
pub fn full_ensemble_terms(model: &HiddenVariableModel, a: &ChAssignment) -> Result<ChTerms> {
    let s = ch_statistics(model, a)?;
    let pp = |st: &EnsembleStatistics| clamp_unit(st.joint(Outcome::Plus, Outcome::Plus));
    Ok(ChTerms {
        p12: pp(&s.s12),
        p14: pp(&s.s14),
        p32: pp(&s.s32),
        p34: pp(&s.s34),
        p3_: clamp_unit(s.s32.single(1, Outcome::Plus)),
        p_2: clamp_unit(s.s12.single(2, Outcome::Plus)),
    })
}

/// CH terms on the coincidence-detected subsample. The singles are the
/// detected marginals of the (f3, f2) and (f1, f2) coincidences.
pub fn detected_subsample_terms(model: &HiddenVariableModel, a: &ChAssignment) -> Result<ChTerms> {
    let s = ch_statistics(model, a)?;
    for st in [&s.s12, &s.s14, &s.s32, &s.s34] {
        if st.detected_fraction <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "no coincidences at settings ({}, {})",
                st.settings.side1, st.settings.side2
            )));
        }
    }
    let pp = |st: &EnsembleStatistics| clamp_unit(st.detected(Outcome::Plus, Outcome::Plus));
    Ok(ChTerms {
        p12: pp(&s.s12),
        p14: pp(&s.s14),
        p32: pp(&s.s32),
        p34: pp(&s.s34),
        p3_: clamp_unit(s.s32.detected_single(1, Outcome::Plus)),
        p_2: clamp_unit(s.s12.detected_single(2, Outcome::Plus)),
    })
}

pub const MODEL_DEMONSTRATION: &str =
    "constructed local model: demonstrates logical possibility only, it is not a physical claim";

pub fn ch_check_full_ensemble(
    model: &HiddenVariableModel,
    a: &ChAssignment,
) -> Result<InequalityReport> {
    let mut report = ch_evaluate(&full_ensemble_terms(model, a)?)?;
    report.name = "clauser_horne_full_ensemble".into();
    Ok(report.note(MODEL_DEMONSTRATION))
}

pub fn ch_check_detected_subsample(
    model: &HiddenVariableModel,
    a: &ChAssignment,
) -> Result<InequalityReport> {
    let mut report = ch_evaluate(&detected_subsample_terms(model, a)?)?;
    report.name = "clauser_horne_detected_subsample".into();
    Ok(report.note(notes::FAIR_SAMPLING).note(MODEL_DEMONSTRATION))
}
