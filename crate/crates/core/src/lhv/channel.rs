//! Local models in which λ fixes the decay channel and decay-time bucket.
//!
//! Every λ carries a hidden flavor tag (+1 K⁰-like, −1 K̄⁰-like). The
//! flavor asymmetry A = (N₊ − N₋)/(N₊ + N₋), the analogue of
//! (|p|² − |q|²)/(|p|² + |q|²), can be estimated from the semileptonic
//! channels alone or from the hidden tags of the whole ensemble. The
//! construction assigns tags to the non-semileptonic λ so that the two
//! estimates differ by a requested bias while the observed branching
//! fractions are untouched.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{statistics, HiddenVariableModel, ModelMetadata, Outcome, SettingsPair, SideTable};
use crate::pair::ChannelId;
use crate::{Error, Result, NORM_TOL};

pub const DECAY_SETTING: &str = "decay";
/// Unobserved partner on side 2.
pub const PARTNER_SETTING: &str = "unobserved";

/// Observed branching fraction per decay channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BranchingTargets(BTreeMap<ChannelId, f64>);

impl BranchingTargets {
    pub fn new(rates: BTreeMap<ChannelId, f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::InvalidInput("no branching targets".into()));
        }
        if rates.contains_key(&ChannelId::NoSelection) {
            return Err(Error::InvalidInput("'none' is not a decay channel".into()));
        }
        if rates.values().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidInput(
                "branching fractions must be >= 0".into(),
            ));
        }
        let total: f64 = rates.values().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidInput(format!(
                "branching fractions sum to {total}"
            )));
        }
        let targets = Self(rates);
        if targets.rate(ChannelId::SemileptonicPlus) + targets.rate(ChannelId::SemileptonicMinus)
            <= 0.0
        {
            return Err(Error::InvalidInput(
                "a semileptonic channel with positive rate is required".into(),
            ));
        }
        Ok(targets)
    }

    pub fn rate(&self, c: ChannelId) -> f64 {
        self.0.get(&c).copied().unwrap_or(0.0)
    }

    pub fn rates(&self) -> &BTreeMap<ChannelId, f64> {
        &self.0
    }

    /// Flavor asymmetry seen in the semileptonic channels.
    pub fn semileptonic_asymmetry(&self) -> f64 {
        let (plus, minus) = (
            self.rate(ChannelId::SemileptonicPlus),
            self.rate(ChannelId::SemileptonicMinus),
        );
        (plus - minus) / (plus + minus)
    }

    /// Bias values the construction can realise.
    pub fn bias_range(&self) -> (f64, f64) {
        let a_sl = self.semileptonic_asymmetry();
        let (plus, minus) = (
            self.rate(ChannelId::SemileptonicPlus),
            self.rate(ChannelId::SemileptonicMinus),
        );
        (a_sl - (1.0 - 2.0 * minus), a_sl - (2.0 * plus - 1.0))
    }
}

/// Decay-time buckets with exponential occupation `e^{−γ lo} − e^{−γ hi}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBuckets {
    pub edges: Vec<f64>,
    pub gamma: f64,
}

impl Default for TimeBuckets {
    /// 8 log-spaced buckets over [0, 10] in units of the short lifetime.
    fn default() -> Self {
        Self::log_spaced(8, 10.0, 1.0).expect("default buckets are valid")
    }
}

impl TimeBuckets {
    /// `[0, t_max 2^{1−n}], …, [t_max/2, t_max]`.
    pub fn log_spaced(n: u16, t_max: f64, gamma: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput(
                "at least one time bucket required".into(),
            ));
        }
        let mut edges = vec![0.0];
        edges.extend((1..=n).map(|k| t_max * 2f64.powi(k as i32 - n as i32)));
        Self { edges, gamma }.validated()
    }

    fn validated(self) -> Result<Self> {
        if self.edges.len() < 2 || self.edges.len() > u16::MAX as usize {
            return Err(Error::InvalidInput(
                "bucket edges must give 1..65535 buckets".into(),
            ));
        }
        if self.edges.iter().any(|e| !e.is_finite())
            || self.edges[0] < 0.0
            || self.edges.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidInput(
                "bucket edges must increase from >= 0".into(),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidInput("bucket decay width must be > 0".into()));
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Occupation of each bucket, normalised over the covered range.
    pub fn fractions(&self) -> Vec<f64> {
        let raw: Vec<f64> = self
            .edges
            .windows(2)
            .map(|w| (-self.gamma * w[0]).exp() - (-self.gamma * w[1]).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|f| f / total).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlavorEstimates {
    pub semileptonic: f64,
    pub full_ensemble: f64,
    /// `semileptonic − full_ensemble`
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ChannelModelOutcome {
    Feasible {
        model: Box<HiddenVariableModel>,
        estimates: FlavorEstimates,
    },
    Infeasible {
        requested_bias: f64,
        min_bias: f64,
        max_bias: f64,
    },
}

/// Builds a model whose observed branching fractions equal `targets` and
/// whose semileptonic flavor asymmetry exceeds the full-ensemble one by
/// `bias`.
pub fn build_channel_dependent_model(
    targets: &BranchingTargets,
    bias: f64,
    buckets: &TimeBuckets,
) -> Result<ChannelModelOutcome> {
    if !bias.is_finite() {
        return Err(Error::InvalidInput(format!("bias {bias} is not finite")));
    }
    let buckets = buckets.clone().validated()?;
    let plus = targets.rate(ChannelId::SemileptonicPlus);
    let minus = targets.rate(ChannelId::SemileptonicMinus);
    let other = 1.0 - plus - minus;
    let (min_bias, max_bias) = targets.bias_range();

    // fraction of the ensemble with tag +1
    let tagged_plus = 0.5 * (1.0 + targets.semileptonic_asymmetry() - bias);
    let infeasible = ChannelModelOutcome::Infeasible {
        requested_bias: bias,
        min_bias,
        max_bias,
    };
    if tagged_plus < plus - NORM_TOL || tagged_plus > 1.0 - minus + NORM_TOL {
        return Ok(infeasible);
    }
    let share = if other > NORM_TOL {
        ((tagged_plus - plus) / other).clamp(0.0, 1.0)
    } else if (tagged_plus - plus).abs() <= NORM_TOL {
        0.0
    } else {
        return Ok(infeasible);
    };

    let fractions = buckets.fractions();
    let mut lambdas = Vec::new();
    let mut weights = Vec::new();
    let mut tags = Vec::new();
    let mut responses = Vec::new();
    for (&channel, &rate) in targets.rates() {
        let splits: &[(i8, f64)] = match channel {
            ChannelId::SemileptonicPlus => &[(1, 1.0)],
            ChannelId::SemileptonicMinus => &[(-1, 1.0)],
            _ => &[(1, share), (-1, 1.0 - share)],
        };
        for &(tag, part) in splits {
            for (k, &f) in fractions.iter().enumerate() {
                let w = rate * part * f;
                if w <= 0.0 {
                    continue;
                }
                let sign = if tag > 0 { '+' } else { '-' };
                lambdas.push(format!("{}/{sign}/t{k}", channel.label()));
                weights.push(w);
                tags.push(tag);
                responses.push(vec![Outcome::Decay {
                    channel,
                    bucket: k as u16,
                }]);
            }
        }
    }
    let drift = 1.0 - weights.iter().sum::<f64>();
    let heaviest = (0..weights.len())
        .max_by(|&i, &j| weights[i].total_cmp(&weights[j]))
        .expect("a semileptonic channel has positive rate");
    weights[heaviest] += drift;

    let n = lambdas.len();
    let model = HiddenVariableModel::new(
        lambdas,
        weights,
        SideTable {
            settings: vec![DECAY_SETTING.into()],
            responses,
        },
        SideTable {
            settings: vec![PARTNER_SETTING.into()],
            responses: vec![vec![Outcome::NoDetect]; n],
        },
        ModelMetadata {
            construction: "channel_dependent".into(),
            notes: vec![
                format!("requested semileptonic minus full-ensemble asymmetry {bias}"),
                super::MODEL_DEMONSTRATION.into(),
            ],
            flavor_tags: Some(tags),
        },
    )?;
    let estimates = flavor_estimates(&model)?;
    Ok(ChannelModelOutcome::Feasible {
        model: Box::new(model),
        estimates,
    })
}

/// Observed per-channel fractions on side 1, summed over time buckets.
pub fn observed_branching(model: &HiddenVariableModel) -> Result<BTreeMap<ChannelId, f64>> {
    let st = statistics(model, &SettingsPair::new(DECAY_SETTING, PARTNER_SETTING))?;
    let mut out = BTreeMap::new();
    for cell in &st.singles_side1 {
        if let Outcome::Decay { channel, .. } = cell.outcome {
            *out.entry(channel).or_insert(0.0) += cell.probability;
        }
    }
    Ok(out)
}

/// Flavor asymmetry estimated from the semileptonic decays alone.
pub fn semileptonic_asymmetry(model: &HiddenVariableModel) -> Result<f64> {
    let b = observed_branching(model)?;
    let plus = b.get(&ChannelId::SemileptonicPlus).copied().unwrap_or(0.0);
    let minus = b.get(&ChannelId::SemileptonicMinus).copied().unwrap_or(0.0);
    if plus + minus <= 0.0 {
        return Err(Error::InvalidInput(
            "model has no semileptonic decays".into(),
        ));
    }
    Ok((plus - minus) / (plus + minus))
}

/// Flavor asymmetry of the hidden tags over the whole ensemble.
pub fn full_ensemble_asymmetry(model: &HiddenVariableModel) -> Result<f64> {
    let tags = model
        .metadata()
        .flavor_tags
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("model carries no flavor tags".into()))?;
    Ok(model
        .weights()
        .iter()
        .zip(tags)
        .map(|(w, &t)| w * f64::from(t))
        .sum())
}

pub fn flavor_estimates(model: &HiddenVariableModel) -> Result<FlavorEstimates> {
    let semileptonic = semileptonic_asymmetry(model)?;
    let full_ensemble = full_ensemble_asymmetry(model)?;
    Ok(FlavorEstimates {
        semileptonic,
        full_ensemble,
        bias: semileptonic - full_ensemble,
    })
}
