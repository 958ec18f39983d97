//! Planted-trajectory recovery runs on simulated data: three senses, five
//! bins, fifty words, two genres, 200 snippets per (bin, genre).

#![allow(dead_code)]

use ndarray::Array3;
use semchange_core::changepoint::{detect_change, DecisionRule};
use semchange_core::gibbs::{run_chain, Preset};
use semchange_core::model::{forward_simulate, Allocation, TrajectorySpec};

pub const SENSES: usize = 3;
pub const BINS: usize = 5;
pub const WORDS: usize = 50;
pub const GENRES: usize = 2;
pub const PER_CELL: usize = 200;

/// Sense `k` puts ten times more weight on its own block of words.
fn planted_psi() -> Vec<Vec<Vec<f64>>> {
    let block = WORDS / SENSES;
    let row = |k: usize| -> Vec<f64> {
        (0..WORDS)
            .map(|w| if w / block == k { 1.0 } else { 0.1 })
            .collect()
    };
    (0..BINS).map(|_| (0..SENSES).map(row).collect()).collect()
}

/// `[T][G][K]`: with `changing`, sense 0 in genre 0 rises linearly from 0.1
/// to 0.7; everything else is constant.
pub fn planted_phi(changing: bool) -> Vec<Vec<Vec<f64>>> {
    let split = |p: f64| vec![p, (1.0 - p) / 2.0, (1.0 - p) / 2.0];
    (0..BINS)
        .map(|t| {
            let p0 = if changing { 0.1 + 0.15 * t as f64 } else { 0.4 };
            vec![split(p0), split(0.1)]
        })
        .collect()
}

pub fn planted_spec(changing: bool) -> TrajectorySpec {
    TrajectorySpec {
        phi: Some(planted_phi(changing)),
        psi: Some(planted_psi()),
        genre_proportions: None,
    }
}

pub struct RecoveryRun {
    pub changed: bool,
    /// `|posterior mean - planted|` per `(t, g, k)` under the best relabeling.
    pub abs_error: Array3<f64>,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

pub fn recovery_run(changing: bool, seed: u64) -> RecoveryRun {
    let preset = Preset::LatinDefault;
    let config = preset.model_config(SENSES, GENRES, BINS, WORDS);
    let sim = forward_simulate(
        &config,
        &planted_spec(changing),
        Allocation::PerBinGenre(PER_CELL),
        1000 + seed,
    )
    .expect("simulation");
    let (_, traj) = run_chain(&sim.snippets, &config, &preset.sampler_config(seed)).expect("chain");
    let changed = detect_change(&traj, &DecisionRule::default())
        .expect("decision")
        .changed();

    let truth = planted_phi(changing);
    let error_under = |perm: &[usize]| {
        Array3::from_shape_fn((BINS, GENRES, SENSES), |(t, g, k)| {
            (traj.mean[[t, g, perm[k]]] - truth[t][g][k]).abs()
        })
    };
    let abs_error = permutations(SENSES)
        .iter()
        .map(|p| error_under(p))
        .min_by(|a, b| a.sum().total_cmp(&b.sum()))
        .expect("at least one permutation");
    RecoveryRun { changed, abs_error }
}
