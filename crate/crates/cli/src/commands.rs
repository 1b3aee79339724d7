//! Command bodies. Each returns a finished report document.

use std::f64::consts::FRAC_PI_4;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use kaonbell::inequalities::{
    bgh_contradiction, ch_evaluate, efficiency_scan, epsilon_prime_test, epsilon_test, ChTerms,
};
use kaonbell::kaon::{cp_eigenstates, mass_eigenstates, FlavorState};
use kaonbell::lhv::{
    build_channel_dependent_model, build_detection_loophole_model, ch_check_detected_subsample,
    ch_check_full_ensemble, flavor_estimates, observed_branching, sample, statistics,
    BranchingTargets, ChAssignment, ChannelModelOutcome, DetectionModelOutcome, DetectionTarget,
    HiddenVariableModel, SettingsPair, TimeBuckets,
};
use kaonbell::pair::{
    channel_table_entry, joint_projection_probability, make_pair, singles_probability, ChannelId,
    SinglesPartition,
};

use crate::config::RunConfig;
use crate::report::{Entry, ModelBuild, ProbabilityRow, ProbabilitySeries, ReportDocument};
use crate::Failure;

pub struct RunContext {
    pub config: RunConfig,
    pub reproducible: bool,
}

impl RunContext {
    fn document(&self, command: &str) -> ReportDocument {
        ReportDocument::new(command, &self.config, self.reproducible)
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn input(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Input(e.into())
}

/// Parses a comma-separated list of reals.
pub fn parse_reals(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .with_context(|| format!("not a number: '{s}'"))
        })
        .collect()
}

enum PairSpec {
    Channels(ChannelId, ChannelId),
    States(String, String),
}

const STATE_LABELS: [&str; 6] = ["k0", "k0bar", "ks", "kl", "kplus", "kminus"];

fn parse_pair(spec: &str) -> anyhow::Result<PairSpec> {
    let (a, b) = spec
        .split_once(':')
        .ok_or_else(|| anyhow!("pair '{spec}' must look like first:second"))?;
    let (a, b) = (a.trim().to_ascii_lowercase(), b.trim().to_ascii_lowercase());
    match (ChannelId::from_label(&a), ChannelId::from_label(&b)) {
        (Some(c1), Some(c2)) => return Ok(PairSpec::Channels(c1, c2)),
        (Some(_), None) | (None, Some(_)) => {
            bail!("pair '{spec}' mixes a decay channel with a state")
        }
        (None, None) => {}
    }
    for s in [&a, &b] {
        if !STATE_LABELS.contains(&s.as_str()) {
            bail!(
                "unknown label '{s}'; channels: sl+, sl-, 2pi0, pipm, other, none; states: {}",
                STATE_LABELS.join(", ")
            );
        }
    }
    Ok(PairSpec::States(a, b))
}

fn state(label: &str, config: &RunConfig) -> anyhow::Result<FlavorState> {
    let m = config.mixing()?;
    let (ks, kl) = mass_eigenstates(&m);
    let (kplus, kminus) = cp_eigenstates(m.alpha());
    Ok(match label {
        "k0" => FlavorState::k0_state(),
        "k0bar" => FlavorState::k0bar_state(),
        "ks" => ks,
        "kl" => kl,
        "kplus" => kplus,
        _ => kminus,
    })
}

pub fn probabilities(
    ctx: &RunContext,
    pairs: &[String],
    times: &[f64],
) -> Result<ReportDocument, Failure> {
    if pairs.is_empty() {
        return Err(usage(anyhow!("at least one --pair is required")));
    }
    if times.is_empty() || times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(usage(anyhow!(
            "time grid must be non-empty with finite t >= 0"
        )));
    }
    let config = &ctx.config;
    let ev = config.evolution_params().map_err(usage)?;
    let d = config.decay_params();
    let partition = SinglesPartition::default();
    let mut doc = ctx.document("probabilities");
    for spec in pairs {
        let parsed = parse_pair(spec).map_err(usage)?;
        let mut rows = Vec::with_capacity(times.len());
        for &t in times {
            let probability = match &parsed {
                PairSpec::Channels(ChannelId::NoSelection, c)
                | PairSpec::Channels(c, ChannelId::NoSelection) => {
                    singles_probability(*c, t, &d, &ev, &partition)
                }
                PairSpec::Channels(c1, c2) => channel_table_entry(*c1, *c2, t, &d, &ev),
                PairSpec::States(a, b) => {
                    let f1 = state(a, config).map_err(usage)?;
                    let f2 = state(b, config).map_err(usage)?;
                    let pair = make_pair(&config.mixing().map_err(usage)?);
                    pair.evolve(t, &ev)
                        .and_then(|p| p.normalized())
                        .and_then(|p| joint_projection_probability(&p, &f1, &f2))
                }
            }
            .map_err(usage)?;
            rows.push(ProbabilityRow { t, probability });
        }
        doc.push(Entry::Probabilities(ProbabilitySeries {
            pair: spec.clone(),
            rows,
        }));
    }
    Ok(doc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Which {
    Eps,
    Epsprime,
    Bgh,
    Ch,
}

fn push_bgh(doc: &mut ReportDocument, config: &RunConfig) -> Result<(), Failure> {
    let m = config.mixing().map_err(usage)?;
    let (direct, swapped, contradicted) = bgh_contradiction(&m).map_err(usage)?;
    doc.push(Entry::Inequality(direct));
    doc.push(Entry::Inequality(swapped));
    doc.push(Entry::Contradiction {
        statement: "|p| = |q| under both flavor orientations".into(),
        contradicted,
    });
    Ok(())
}

pub fn inequality(
    ctx: &RunContext,
    which: Which,
    ch_probs: Option<&str>,
) -> Result<ReportDocument, Failure> {
    let config = &ctx.config;
    let mut doc = ctx.document(&format!(
        "inequality {}",
        format!("{which:?}").to_lowercase()
    ));
    match which {
        Which::Eps => doc.push(Entry::Inequality(epsilon_test(config.epsilon()))),
        Which::Epsprime => doc.push(Entry::Inequality(epsilon_prime_test(
            config.eps_prime.value(),
        ))),
        Which::Bgh => push_bgh(&mut doc, config)?,
        Which::Ch => {
            let text = ch_probs
                .ok_or_else(|| usage(anyhow!("ch needs --ch-probs p12,p14,p32,p34,p3_,p_2")))?;
            let v = parse_reals(text).map_err(usage)?;
            let [p12, p14, p32, p34, p3_, p_2] = v[..] else {
                return Err(usage(anyhow!(
                    "--ch-probs needs exactly 6 values, got {}",
                    v.len()
                )));
            };
            let terms = ChTerms {
                p12,
                p14,
                p32,
                p34,
                p3_,
                p_2,
            };
            doc.push(Entry::Inequality(ch_evaluate(&terms).map_err(usage)?));
        }
    }
    Ok(doc)
}

/// π/4 down to 0.01, where the threshold approaches its limit.
pub const DEFAULT_ANGLES: [f64; 9] = [
    FRAC_PI_4,
    std::f64::consts::FRAC_PI_6,
    std::f64::consts::FRAC_PI_8,
    std::f64::consts::PI / 12.0,
    0.1,
    0.05,
    0.03,
    0.02,
    0.01,
];

pub fn efficiency(ctx: &RunContext, angles: &[f64]) -> Result<ReportDocument, Failure> {
    if angles.is_empty() {
        return Err(usage(anyhow!("angle grid is empty")));
    }
    let results = efficiency_scan(angles).map_err(usage)?;
    let mut doc = ctx.document("efficiency-scan");
    for r in results {
        doc.push(Entry::EfficiencyScan(r));
    }
    Ok(doc)
}

pub fn report(ctx: &RunContext) -> Result<ReportDocument, Failure> {
    let config = &ctx.config;
    let mut doc = ctx.document("report");
    doc.push(Entry::Inequality(epsilon_test(config.epsilon())));
    doc.push(Entry::Inequality(epsilon_prime_test(
        config.eps_prime.value(),
    )));
    push_bgh(&mut doc, config)?;
    for r in efficiency_scan(&[FRAC_PI_4]).map_err(usage)? {
        doc.push(Entry::EfficiencyScan(r));
    }
    Ok(doc)
}

pub enum DetectionTargetSpec {
    MaximallyEntangled,
    Product(Vec<f64>, Vec<f64>),
    File(PathBuf),
}

fn write_model(model: &HiddenVariableModel, path: &Path) -> Result<(), Failure> {
    let mut text = model.to_json();
    text.push('\n');
    std::fs::write(path, text)
        .with_context(|| format!("cannot write model {}", path.display()))
        .map_err(input)
}

fn default_assignment(model: &HiddenVariableModel) -> Option<ChAssignment> {
    let (s1, s2) = (&model.side1().settings, &model.side2().settings);
    (s1.len() >= 2 && s2.len() >= 2).then(|| ChAssignment::new(&s1[0], &s2[0], &s1[1], &s2[1]))
}

fn push_ch_pair(
    doc: &mut ReportDocument,
    model: &HiddenVariableModel,
    a: &ChAssignment,
) -> Result<(), Failure> {
    doc.push(Entry::Inequality(
        ch_check_full_ensemble(model, a).map_err(usage)?,
    ));
    match ch_check_detected_subsample(model, a) {
        Ok(r) => doc.push(Entry::Inequality(r)),
        Err(kaonbell::Error::InvalidInput(_)) => {}
        Err(e) => return Err(usage(e)),
    }
    Ok(())
}

pub fn build_detection(
    ctx: &RunContext,
    target: DetectionTargetSpec,
    eta: f64,
    model_out: &Path,
) -> Result<ReportDocument, Failure> {
    let target = match target {
        DetectionTargetSpec::MaximallyEntangled => DetectionTarget::maximally_entangled_optimal(),
        DetectionTargetSpec::Product(p1, p2) => {
            DetectionTarget::product(&p1, &p2).map_err(usage)?
        }
        DetectionTargetSpec::File(path) => {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("cannot read target {}", path.display()))
                .map_err(input)?;
            let t: DetectionTarget = serde_json::from_str(&text)
                .with_context(|| format!("malformed target {}", path.display()))
                .map_err(input)?;
            t.validated().map_err(input)?
        }
    };
    let outcome = build_detection_loophole_model(&target, eta).map_err(usage)?;
    let mut doc = ctx.document("lhv build-detection");
    match outcome {
        DetectionModelOutcome::Feasible {
            model,
            achieved_eta,
        } => {
            write_model(&model, model_out)?;
            doc.push(Entry::ModelBuild(ModelBuild {
                construction: "detection_loophole".into(),
                status: "feasible".into(),
                model_path: Some(model_out.display().to_string()),
                values: vec![
                    ("requested_eta".into(), eta),
                    ("achieved_eta".into(), achieved_eta),
                    ("lambda_count".into(), model.lambdas().len() as f64),
                ],
                notes: model.metadata().notes.clone(),
            }));
            if let Some(a) = default_assignment(&model) {
                push_ch_pair(&mut doc, &model, &a)?;
            }
        }
        DetectionModelOutcome::Infeasible {
            requested_eta,
            max_feasible_eta,
        } => doc.push(Entry::ModelBuild(ModelBuild {
            construction: "detection_loophole".into(),
            status: "infeasible".into(),
            model_path: None,
            values: vec![
                ("requested_eta".into(), requested_eta),
                ("max_feasible_eta".into(), max_feasible_eta),
            ],
            notes: vec!["no local model reproduces the target at the requested efficiency".into()],
        })),
    }
    Ok(doc)
}

/// `sl+=0.4,2pi0=0.6`
pub fn parse_branching(text: &str) -> anyhow::Result<BranchingTargets> {
    let mut rates = std::collections::BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (label, value) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("branching entry '{item}' must look like channel=rate"))?;
        let channel = ChannelId::from_label(label.trim())
            .ok_or_else(|| anyhow!("unknown channel '{label}'"))?;
        let rate: f64 = value
            .trim()
            .parse()
            .with_context(|| format!("bad rate '{value}'"))?;
        if rates.insert(channel, rate).is_some() {
            bail!("channel '{label}' listed twice");
        }
    }
    Ok(BranchingTargets::new(rates)?)
}

pub fn build_channel(
    ctx: &RunContext,
    targets: &BranchingTargets,
    bias: f64,
    buckets: &TimeBuckets,
    model_out: &Path,
) -> Result<ReportDocument, Failure> {
    let outcome = build_channel_dependent_model(targets, bias, buckets).map_err(usage)?;
    let mut doc = ctx.document("lhv build-channel");
    match outcome {
        ChannelModelOutcome::Feasible { model, estimates } => {
            write_model(&model, model_out)?;
            let mut values = vec![("requested_bias".into(), bias)];
            for (c, r) in observed_branching(&model).map_err(usage)? {
                values.push((format!("observed_branching_{}", c.label()), r));
            }
            doc.push(Entry::ModelBuild(ModelBuild {
                construction: "channel_dependent".into(),
                status: "feasible".into(),
                model_path: Some(model_out.display().to_string()),
                values,
                notes: model.metadata().notes.clone(),
            }));
            doc.push(Entry::FlavorEstimates(estimates));
        }
        ChannelModelOutcome::Infeasible {
            requested_bias,
            min_bias,
            max_bias,
        } => doc.push(Entry::ModelBuild(ModelBuild {
            construction: "channel_dependent".into(),
            status: "infeasible".into(),
            model_path: None,
            values: vec![
                ("requested_bias".into(), requested_bias),
                ("min_bias".into(), min_bias),
                ("max_bias".into(), max_bias),
            ],
            notes: vec!["requested bias outside the range allowed by the branching targets".into()],
        })),
    }
    Ok(doc)
}

pub fn simulate(
    ctx: &RunContext,
    model_path: &Path,
    settings: Option<&str>,
    ch: Option<&str>,
) -> Result<ReportDocument, Failure> {
    let text = std::fs::read_to_string(model_path)
        .with_context(|| format!("cannot read model {}", model_path.display()))
        .map_err(input)?;
    let model = HiddenVariableModel::from_json(&text)
        .with_context(|| format!("malformed model {}", model_path.display()))
        .map_err(input)?;

    let pairs: Vec<SettingsPair> = match settings {
        Some(s) => {
            let (a, b) = s
                .split_once(',')
                .ok_or_else(|| usage(anyhow!("--settings must look like s1,s2")))?;
            vec![SettingsPair::new(a.trim(), b.trim())]
        }
        None => model
            .side1()
            .settings
            .iter()
            .flat_map(|a| {
                model
                    .side2()
                    .settings
                    .iter()
                    .map(move |b| SettingsPair::new(a.clone(), b.clone()))
            })
            .collect(),
    };
    let assignment = match ch {
        Some(text) => {
            let names: Vec<&str> = text.split(',').map(str::trim).collect();
            let [f1, f2, f3, f4] = names[..] else {
                return Err(usage(anyhow!("--ch needs four settings f1,f2,f3,f4")));
            };
            Some(ChAssignment::new(f1, f2, f3, f4))
        }
        None => default_assignment(&model),
    };

    let config = &ctx.config;
    let mut doc = ctx.document("lhv simulate");
    for (k, pair) in pairs.iter().enumerate() {
        doc.push(Entry::EnsembleStatistics(
            statistics(&model, pair).map_err(usage)?,
        ));
        let seed = config.mc.seed.wrapping_add(k as u64);
        doc.push(Entry::SampleCounts(
            sample(&model, pair, config.mc.n, seed).map_err(usage)?,
        ));
    }
    if let Some(a) = assignment {
        push_ch_pair(&mut doc, &model, &a)?;
    }
    if model.metadata().flavor_tags.is_some() {
        doc.push(Entry::FlavorEstimates(
            flavor_estimates(&model).map_err(usage)?,
        ));
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_parsing() {
        assert!(matches!(parse_pair("sl+:2pi0"), Ok(PairSpec::Channels(..))));
        assert!(matches!(
            parse_pair("KPlus:k0bar"),
            Ok(PairSpec::States(..))
        ));
        assert!(parse_pair("sl+:k0").is_err());
        assert!(parse_pair("foo:bar").is_err());
        assert!(parse_pair("sl+").is_err());
    }

    #[test]
    fn branching_parsing() {
        let t = parse_branching("sl+=0.4, 2pi0=0.6").unwrap();
        assert_eq!(t.rate(ChannelId::TwoPiZero), 0.6);
        assert!(parse_branching("sl+=0.4,sl+=0.6").is_err());
        assert!(parse_branching("xx=1").is_err());
        assert!(parse_branching("sl+=0.5").is_err());
    }

    #[test]
    fn reals() {
        assert_eq!(parse_reals("0, 0.5,1").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_reals("").unwrap().is_empty());
        assert!(parse_reals("a").is_err());
    }
}
