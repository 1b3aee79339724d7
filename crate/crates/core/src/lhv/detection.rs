//! Local models that reproduce a target coincidence distribution on the
//! detected subsample only.
//!
//! The modelled experiment loses each particle independently, so at
//! efficiency η and settings (x, y) the full statistics are
//!
//!   P(a, b) = η² T_xy(a, b),  P(a, ∅) = η(1 − η) T_x(a),
//!   P(∅, b) = η(1 − η) T_y(b),  P(∅, ∅) = (1 − η)²,
//!
//! with T the target and T_x, T_y its marginals. Each side answers "+",
//! "−" or nothing at every setting, so with two settings per side there are
//! 9 × 9 deterministic strategies, and finding mixture weights that
//! reproduce these statistics is a linear feasibility problem. The detected
//! subsample then equals T and every side detects with probability η.

use serde::{Deserialize, Serialize};

use super::simplex::{find_feasible, EqualitySystem, Feasibility};
use super::{statistics, HiddenVariableModel, ModelMetadata, Outcome, SettingsPair, SideTable};
use crate::inequalities::outcome_distribution;
use crate::{Error, Result, NORM_TOL};

/// Residual tolerance of the feasibility solve and of the final check.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Width of the bracket on the maximal feasible η.
pub const ETA_RESOLUTION: f64 = 1e-6;
const MAX_SETTINGS: usize = 3;
const PRUNE_WEIGHT: f64 = 1e-14;
const RESPONSES: [Outcome; 3] = [Outcome::Plus, Outcome::Minus, Outcome::NoDetect];

/// Detected-subsample distribution per settings pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionTarget {
    pub settings1: Vec<String>,
    pub settings2: Vec<String>,
    /// `joint[x][y] = [[P(+,+), P(+,−)], [P(−,+), P(−,−)]]`
    pub joint: Vec<Vec<[[f64; 2]; 2]>>,
}

fn default_names(prefix: char, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{prefix}{k}")).collect()
}

impl DetectionTarget {
    /// Independent outcomes with P(+) = `plus1[x]` on side 1 and
    /// `plus2[y]` on side 2.
    pub fn product(plus1: &[f64], plus2: &[f64]) -> Result<Self> {
        let joint = plus1
            .iter()
            .map(|&p| {
                plus2
                    .iter()
                    .map(|&q| {
                        [
                            [p * q, p * (1.0 - q)],
                            [(1.0 - p) * q, (1.0 - p) * (1.0 - q)],
                        ]
                    })
                    .collect()
            })
            .collect();
        Self {
            settings1: default_names('a', plus1.len()),
            settings2: default_names('b', plus2.len()),
            joint,
        }
        .validated()
    }

    /// Perfect-detection statistics of cos θ|00⟩ + sin θ|11⟩ measured at
    /// projective angles `angles1` and `angles2`.
    pub fn two_qubit(state_angle: f64, angles1: &[f64], angles2: &[f64]) -> Result<Self> {
        let joint = angles1
            .iter()
            .map(|&a| {
                angles2
                    .iter()
                    .map(|&b| outcome_distribution(state_angle, a, b))
                    .collect()
            })
            .collect();
        Self {
            settings1: default_names('a', angles1.len()),
            settings2: default_names('b', angles2.len()),
            joint,
        }
        .validated()
    }

    /// Maximally entangled target at angles (a, b, a′, b′) = (0, π/8, π/4, 3π/8),
    /// where the Clauser-Horne violation is largest. Settings a0, b0, a1, b1
    /// play f1, f2, f3, f4.
    pub fn maximally_entangled_optimal() -> Self {
        use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};
        Self::two_qubit(FRAC_PI_4, &[0.0, FRAC_PI_4], &[FRAC_PI_8, 3.0 * FRAC_PI_8])
            .expect("fixed target is valid")
    }

    pub fn validated(self) -> Result<Self> {
        let (n1, n2) = (self.settings1.len(), self.settings2.len());
        if n1 == 0 || n2 == 0 || n1 > MAX_SETTINGS || n2 > MAX_SETTINGS {
            return Err(Error::InvalidInput(format!(
                "between 1 and {MAX_SETTINGS} settings per side required"
            )));
        }
        if self.joint.len() != n1 || self.joint.iter().any(|row| row.len() != n2) {
            return Err(Error::InvalidInput(
                "target shape does not match settings".into(),
            ));
        }
        for (x, row) in self.joint.iter().enumerate() {
            for (y, cell) in row.iter().enumerate() {
                let flat = cell.iter().flatten();
                if flat.clone().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "negative target entry at ({x}, {y})"
                    )));
                }
                let total: f64 = flat.sum();
                if (total - 1.0).abs() > NORM_TOL {
                    return Err(Error::InvalidInput(format!(
                        "target at ({x}, {y}) sums to {total}"
                    )));
                }
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DetectionModelOutcome {
    Feasible {
        model: Box<HiddenVariableModel>,
        /// Smallest detection probability over all settings of both sides.
        achieved_eta: f64,
    },
    Infeasible {
        requested_eta: f64,
        max_feasible_eta: f64,
    },
}

/// Responses of one side at each of its `n` settings, enumerated in base 3.
fn side_strategies(n: usize) -> Vec<Vec<Outcome>> {
    let count = 3usize.pow(n as u32);
    (0..count)
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let r = RESPONSES[k % 3];
                    k /= 3;
                    r
                })
                .collect()
        })
        .collect()
}

fn outcome_index(o: Outcome) -> usize {
    match o {
        Outcome::Plus => 0,
        Outcome::Minus => 1,
        _ => 2,
    }
}

fn strategy_label(r: &[Outcome]) -> String {
    r.iter()
        .map(|o| match o {
            Outcome::Plus => '+',
            Outcome::Minus => '-',
            _ => '0',
        })
        .collect()
}

struct Problem {
    strategies: Vec<(Vec<Outcome>, Vec<Outcome>)>,
}

impl Problem {
    fn new(target: &DetectionTarget) -> Self {
        let s1 = side_strategies(target.settings1.len());
        let s2 = side_strategies(target.settings2.len());
        let strategies = s1
            .iter()
            .flat_map(|a| s2.iter().map(move |b| (a.clone(), b.clone())))
            .collect();
        Self { strategies }
    }

    fn system(&self, target: &DetectionTarget, eta: f64) -> EqualitySystem {
        let (n1, n2) = (target.settings1.len(), target.settings2.len());
        let mut system = EqualitySystem::default();
        let both = eta * eta;
        let one = eta * (1.0 - eta);
        let none = (1.0 - eta) * (1.0 - eta);

        let mut row = vec![1.0; self.strategies.len()];
        system.push(std::mem::take(&mut row), 1.0);

        for x in 0..n1 {
            for y in 0..n2 {
                let t = &target.joint[x][y];
                // index 2 is "no detection"
                for a in 0..3 {
                    for b in 0..3 {
                        let probability = match (a, b) {
                            (2, 2) => none,
                            (2, b) => one * (t[0][b] + t[1][b]),
                            (a, 2) => one * (t[a][0] + t[a][1]),
                            (a, b) => both * t[a][b],
                        };
                        let row = self
                            .strategies
                            .iter()
                            .map(|(r1, r2)| {
                                let hit = outcome_index(r1[x]) == a && outcome_index(r2[y]) == b;
                                if hit {
                                    1.0
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                        system.push(row, probability);
                    }
                }
            }
        }
        system
    }

    fn solve(&self, target: &DetectionTarget, eta: f64) -> Result<Option<Vec<f64>>> {
        match find_feasible(&self.system(target, eta), FEASIBILITY_TOL) {
            Feasibility::Feasible(x) => Ok(Some(x)),
            Feasibility::Infeasible(_) => Ok(None),
            Feasibility::IterationLimit => Err(Error::Numerical(
                "feasibility solve did not terminate".into(),
            )),
        }
    }

    fn model(
        &self,
        target: &DetectionTarget,
        weights: &[f64],
        eta: f64,
    ) -> Result<HiddenVariableModel> {
        let kept: Vec<usize> = (0..weights.len())
            .filter(|&l| weights[l] > PRUNE_WEIGHT)
            .collect();
        let total: f64 = kept.iter().map(|&l| weights[l]).sum();
        if kept.is_empty() || total <= 0.0 {
            return Err(Error::Numerical("feasible point has no weight".into()));
        }
        let mut lambdas = Vec::with_capacity(kept.len());
        let mut w = Vec::with_capacity(kept.len());
        let mut r1 = Vec::with_capacity(kept.len());
        let mut r2 = Vec::with_capacity(kept.len());
        for &l in &kept {
            let (a, b) = &self.strategies[l];
            lambdas.push(format!("{}|{}", strategy_label(a), strategy_label(b)));
            w.push(weights[l] / total);
            r1.push(a.clone());
            r2.push(b.clone());
        }
        // absorb the last ulp of the renormalisation
        let drift = 1.0 - w.iter().sum::<f64>();
        let heaviest = (0..w.len())
            .max_by(|&i, &j| w[i].total_cmp(&w[j]))
            .unwrap_or(0);
        w[heaviest] += drift;

        HiddenVariableModel::new(
            lambdas,
            w,
            SideTable {
                settings: target.settings1.clone(),
                responses: r1,
            },
            SideTable {
                settings: target.settings2.clone(),
                responses: r2,
            },
            ModelMetadata {
                construction: "detection_loophole".into(),
                notes: vec![
                    format!("requested per-side detection probability {eta}"),
                    super::MODEL_DEMONSTRATION.into(),
                ],
                flavor_tags: None,
            },
        )
    }
}

/// Checks the detected conditional against the target and returns the
/// smallest per-side detection probability.
fn verify(model: &HiddenVariableModel, target: &DetectionTarget) -> Result<f64> {
    let signs = [Outcome::Plus, Outcome::Minus];
    let mut eta = f64::INFINITY;
    for (x, s1) in target.settings1.iter().enumerate() {
        for (y, s2) in target.settings2.iter().enumerate() {
            let st = statistics(model, &SettingsPair::new(s1.clone(), s2.clone()))?;
            for a in 0..2 {
                for b in 0..2 {
                    let got = st.detected(signs[a], signs[b]);
                    let want = target.joint[x][y][a][b];
                    if (got - want).abs() > FEASIBILITY_TOL {
                        return Err(Error::Numerical(format!(
                            "detected statistics at ({s1}, {s2}) off by {}",
                            got - want
                        )));
                    }
                }
            }
            eta = eta
                .min(st.detection_probability(1))
                .min(st.detection_probability(2));
        }
    }
    Ok(eta)
}

/// Searches for a local model whose coincidences reproduce `target` while
/// each side detects with probability `eta` at every setting. If none
/// exists, bisects for the largest η that still admits one.
pub fn build_detection_loophole_model(
    target: &DetectionTarget,
    eta: f64,
) -> Result<DetectionModelOutcome> {
    let target = target.clone().validated()?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!("efficiency {eta} outside (0, 1]")));
    }
    let problem = Problem::new(&target);
    if let Some(weights) = problem.solve(&target, eta)? {
        let model = problem.model(&target, &weights, eta)?;
        let achieved_eta = verify(&model, &target)?;
        if achieved_eta < eta - FEASIBILITY_TOL {
            return Err(Error::Numerical(format!(
                "model detects with {achieved_eta}, requested {eta}"
            )));
        }
        return Ok(DetectionModelOutcome::Feasible {
            model: Box::new(model),
            achieved_eta,
        });
    }

    // lo stays 0 when no efficiency works, e.g. for a signalling target
    let (mut lo, mut hi) = (0.0, eta);
    while hi - lo > ETA_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if problem.solve(&target, mid)?.is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DetectionModelOutcome::Infeasible {
        requested_eta: eta,
        max_feasible_eta: lo,
    })
}
