//! Binary change decisions from posterior sense trajectories.
//!
//! A lemma changed if some sense, in some genre, moves its posterior mean by
//! at least two posterior standard deviations between two time bins. A rise
//! marks an emerging sense and a drop a disappearing one.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::PosteriorTrajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Rise,
    Drop,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Rise => "rise",
            Direction::Drop => "drop",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeEvidence {
    pub sense: usize,
    pub genre: usize,
    pub t1: usize,
    pub t2: usize,
    pub direction: Direction,
    /// Absolute difference of the posterior means.
    pub magnitude: f64,
}

/// `evidence` is present exactly when the lemma changed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeDecision {
    pub evidence: Option<ChangeEvidence>,
}

impl ChangeDecision {
    pub fn unchanged() -> Self {
        ChangeDecision { evidence: None }
    }

    pub fn changed(&self) -> bool {
        self.evidence.is_some()
    }
}

/// Which bin pairs are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairScope {
    #[default]
    AnyPair,
    Endpoints,
}

/// Which standard deviation a difference is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpreadRule {
    /// `max(std[t1], std[t2])`.
    #[default]
    Max,
    /// `sqrt((std[t1]² + std[t2]²) / 2)`.
    Pooled,
    /// `min(std[t1], std[t2])`: either bin's spread suffices.
    Either,
}

impl SpreadRule {
    fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            SpreadRule::Max => a.max(b),
            SpreadRule::Pooled => ((a * a + b * b) / 2.0).sqrt(),
            SpreadRule::Either => a.min(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub pairs: PairScope,
    pub spread: SpreadRule,
    /// Number of standard deviations; 2 by default.
    pub sigmas: f64,
}

impl Default for DecisionRule {
    fn default() -> Self {
        DecisionRule {
            pairs: PairScope::AnyPair,
            spread: SpreadRule::Max,
            sigmas: 2.0,
        }
    }
}

/// Apply the two-sigma rule to one trajectory.
///
/// Differences exactly at the threshold count as a change; a zero difference
/// never does. Among qualifying tuples the largest difference is reported,
/// with ties going to the first in (genre, sense, t1, t2) order.
pub fn detect_change(trajectory: &PosteriorTrajectory, rule: &DecisionRule) -> Result<ChangeDecision> {
    let (t_n, g_n, k_n) = trajectory.mean.dim();
    if t_n < 2 {
        return Err(Error::Invalid(format!(
            "change detection needs at least 2 time bins, trajectory has {t_n}"
        )));
    }
    if trajectory.std.dim() != trajectory.mean.dim() {
        return Err(Error::Dimension("mean and std shapes differ".into()));
    }
    let pairs: Vec<(usize, usize)> = match rule.pairs {
        PairScope::AnyPair => (0..t_n)
            .flat_map(|a| (a + 1..t_n).map(move |b| (a, b)))
            .collect(),
        PairScope::Endpoints => vec![(0, t_n - 1)],
    };

    let mut best: Option<ChangeEvidence> = None;
    for g in 0..g_n {
        for k in 0..k_n {
            for &(t1, t2) in &pairs {
                let diff = trajectory.mean[[t2, g, k]] - trajectory.mean[[t1, g, k]];
                let spread = rule
                    .spread
                    .combine(trajectory.std[[t1, g, k]], trajectory.std[[t2, g, k]]);
                let magnitude = diff.abs();
                if magnitude == 0.0 || magnitude < rule.sigmas * spread {
                    continue;
                }
                if best.as_ref().is_none_or(|b| magnitude > b.magnitude) {
                    best = Some(ChangeEvidence {
                        sense: k,
                        genre: g,
                        t1,
                        t2,
                        direction: if diff > 0.0 {
                            Direction::Rise
                        } else {
                            Direction::Drop
                        },
                        magnitude,
                    });
                }
            }
        }
    }
    Ok(ChangeDecision { evidence: best })
}

#[derive(Debug, Default)]
pub struct BatchDecisions {
    pub decisions: BTreeMap<String, ChangeDecision>,
    pub errors: BTreeMap<String, Error>,
}

/// Decide every lemma independently; failures are collected per lemma.
pub fn detect_change_batch(
    trajectories: &BTreeMap<String, PosteriorTrajectory>,
    rule: &DecisionRule,
) -> Result<BatchDecisions> {
    if trajectories.is_empty() {
        return Err(Error::Empty("no trajectories to decide".into()));
    }
    let mut out = BatchDecisions::default();
    for (lemma, traj) in trajectories {
        match detect_change(traj, rule) {
            Ok(d) => {
                out.decisions.insert(lemma.clone(), d);
            }
            Err(e) => {
                out.errors.insert(lemma.clone(), e);
            }
        }
    }
    Ok(out)
}

/// Header of the decision TSV.
pub const DECISION_HEADER: &str = "lemma\tchanged\tsense\tgenre\tt1\tt2\tdirection\tmagnitude";

/// One TSV row; evidence columns are `-` for unchanged lemmas. `genre_labels`
/// names the genre column when given.
pub fn decision_row(lemma: &str, decision: &ChangeDecision, genre_labels: Option<&[String]>) -> String {
    match &decision.evidence {
        None => format!("{lemma}\t0\t-\t-\t-\t-\t-\t-"),
        Some(e) => {
            let genre = genre_labels
                .and_then(|l| l.get(e.genre).cloned())
                .unwrap_or_else(|| e.genre.to_string());
            format!(
                "{lemma}\t1\t{}\t{genre}\t{}\t{}\t{}\t{}",
                e.sense, e.t1, e.t2, e.direction, e.magnitude
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array3, Axis};
    use proptest::prelude::*;

    fn single_series(means: &[f64], stds: &[f64]) -> PosteriorTrajectory {
        let t = means.len();
        let mut mean = Array3::zeros((t, 1, 2));
        let mut std = Array3::zeros((t, 1, 2));
        for i in 0..t {
            mean[[i, 0, 0]] = means[i];
            mean[[i, 0, 1]] = 1.0 - means[i];
            std[[i, 0, 0]] = stds[i];
            std[[i, 0, 1]] = stds[i];
        }
        PosteriorTrajectory {
            mean,
            std,
            n_samples: 100,
            genre_labels: vec!["0".into()],
        }
    }

    #[test]
    fn constant_means_are_unchanged() {
        let d = detect_change(&single_series(&[0.3; 4], &[0.05; 4]), &DecisionRule::default()).unwrap();
        assert!(!d.changed());
        let d = detect_change(&single_series(&[0.3; 4], &[0.0; 4]), &DecisionRule::default()).unwrap();
        assert!(!d.changed());
    }

    #[test]
    fn rising_sense_is_flagged() {
        let traj = single_series(&[0.05, 0.10, 0.45, 0.60], &[0.05, 0.04, 0.05, 0.03]);
        let d = detect_change(&traj, &DecisionRule::default()).unwrap();
        let e = d.evidence.unwrap();
        assert_eq!((e.sense, e.t1, e.t2, e.direction), (0, 0, 3, Direction::Rise));
        assert!((e.magnitude - 0.55).abs() < 1e-12);
    }

    #[test]
    fn small_shift_within_noise() {
        let d = detect_change(&single_series(&[0.5, 0.4], &[0.2, 0.2]), &DecisionRule::default()).unwrap();
        assert!(!d.changed());
    }

    #[test]
    fn exact_threshold_counts() {
        let d = detect_change(&single_series(&[0.5, 0.25], &[0.125, 0.125]), &DecisionRule::default()).unwrap();
        assert_eq!(d.evidence.unwrap().direction, Direction::Drop);
    }

    #[test]
    fn endpoints_only_misses_interior_peak() {
        let traj = single_series(&[0.1, 0.8, 0.1], &[0.05; 3]);
        assert!(detect_change(&traj, &DecisionRule::default()).unwrap().changed());
        let rule = DecisionRule {
            pairs: PairScope::Endpoints,
            ..DecisionRule::default()
        };
        assert!(!detect_change(&traj, &rule).unwrap().changed());
    }

    #[test]
    fn spread_rules_order() {
        // diff 0.3, stds 0.2 and 0.1: max needs 0.4, pooled ~0.316, either 0.2.
        let traj = single_series(&[0.5, 0.8], &[0.2, 0.1]);
        let decide = |spread| {
            detect_change(&traj, &DecisionRule { spread, ..DecisionRule::default() })
                .unwrap()
                .changed()
        };
        assert!(!decide(SpreadRule::Max));
        assert!(!decide(SpreadRule::Pooled));
        assert!(decide(SpreadRule::Either));
    }

    #[test]
    fn single_bin_is_an_error() {
        assert!(detect_change(&single_series(&[0.5], &[0.1]), &DecisionRule::default()).is_err());
    }

    #[test]
    fn any_genre_suffices() {
        let mut traj = single_series(&[0.3, 0.3], &[0.01, 0.01]);
        let mut mean = Array3::zeros((2, 2, 2));
        let mut std = Array3::from_elem((2, 2, 2), 0.01);
        mean.index_axis_mut(Axis(1), 0).assign(&traj.mean.index_axis(Axis(1), 0));
        mean[[0, 1, 0]] = 0.1;
        mean[[0, 1, 1]] = 0.9;
        mean[[1, 1, 0]] = 0.6;
        mean[[1, 1, 1]] = 0.4;
        std[[0, 1, 0]] = 0.02;
        traj.mean = mean;
        traj.std = std;
        traj.genre_labels = vec!["a".into(), "b".into()];
        let e = detect_change(&traj, &DecisionRule::default()).unwrap().evidence.unwrap();
        assert_eq!(e.genre, 1);
        assert_eq!(
            decision_row("w", &ChangeDecision { evidence: Some(e) }, Some(&traj.genre_labels)),
            "w\t1\t0\tb\t0\t1\trise\t0.5"
        );
    }

    #[test]
    fn batch_isolates_errors_and_orders_by_lemma() {
        let mut map = BTreeMap::new();
        for i in 0..40 {
            map.insert(format!("lemma{i:02}"), single_series(&[0.1, 0.9], &[0.05, 0.05]));
        }
        map.insert("broken".into(), single_series(&[0.5], &[0.1]));
        let out = detect_change_batch(&map, &DecisionRule::default()).unwrap();
        assert_eq!(out.decisions.len(), 40);
        assert!(out.errors.contains_key("broken"));
        let keys: Vec<_> = out.decisions.keys().cloned().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(detect_change_batch(&BTreeMap::new(), &DecisionRule::default()).is_err());
    }

    fn arb_trajectory() -> impl Strategy<Value = PosteriorTrajectory> {
        (2usize..6, 1usize..3, 1usize..4).prop_flat_map(|(t, g, k)| {
            (
                prop::collection::vec(0.0f64..1.0, t * g * k),
                prop::collection::vec(0.0f64..0.3, t * g * k),
            )
                .prop_map(move |(m, s)| PosteriorTrajectory {
                    mean: Array3::from_shape_vec((t, g, k), m).unwrap(),
                    std: Array3::from_shape_vec((t, g, k), s).unwrap(),
                    n_samples: 10,
                    genre_labels: (0..g).map(|i| i.to_string()).collect(),
                })
        })
    }

    proptest! {
        #[test]
        fn inflating_std_never_creates_changes(traj in arb_trajectory(), factor in 1.0f64..5.0) {
            let rule = DecisionRule::default();
            let before = detect_change(&traj, &rule).unwrap().changed();
            let mut inflated = traj.clone();
            inflated.std.mapv_inplace(|s| s * factor);
            let after = detect_change(&inflated, &rule).unwrap().changed();
            prop_assert!(before || !after);
        }

        #[test]
        fn time_reversal_swaps_direction(traj in arb_trajectory()) {
            let rule = DecisionRule::default();
            let fwd = detect_change(&traj, &rule).unwrap();
            let mut rev = traj.clone();
            rev.mean.invert_axis(Axis(0));
            rev.std.invert_axis(Axis(0));
            let bwd = detect_change(&rev, &rule).unwrap();
            prop_assert_eq!(fwd.changed(), bwd.changed());
            if let (Some(a), Some(b)) = (fwd.evidence, bwd.evidence) {
                prop_assert!((a.magnitude - b.magnitude).abs() < 1e-12);
                let last = traj.time_bins() - 1;
                if (a.sense, a.genre) == (b.sense, b.genre) && a.t1 + b.t2 == last && a.t2 + b.t1 == last {
                    prop_assert_ne!(a.direction, b.direction);
                }
            }
        }
    }
}
