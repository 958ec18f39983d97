//! Generative model state, priors and the forward simulator.
//!
//! Word distributions are `psi[t][k] = softmax(chi[t, k, ..])` and genre
//! specific sense distributions are `phi[t][g] = softmax(zeta[t, g, ..])`.
//! Every coordinate of `chi` and `zeta` follows a first-order Gaussian random
//! walk over time:
//!
//! ```text
//! x[0]  ~ N(0, sigma0^2)
//! x[t]  ~ N(x[t-1], 1 / precision)      t = 1..T-1
//! ```
//!
//! with precision `kappa_psi` (fixed) for `chi` and `kappa_phi` for `zeta`,
//! where `kappa_phi ~ Gamma(a, b)` in shape/rate form. A snippet in bin `t`
//! and genre `g` draws its sense `z ~ Categorical(phi[t][g])` and every context
//! word i.i.d. from `psi[t][z]`. The word distributions are shared by all
//! genres.

use ndarray::{s, Array2, Array3, ArrayView1, ArrayView2, ArrayViewMut1, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::corpus::{Document, Snippet};
use crate::error::{Error, Result};

/// Probabilities are floored here before taking logs.
pub const PROB_FLOOR: f64 = 1e-300;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub senses: usize,
    pub genres: usize,
    pub time_bins: usize,
    pub vocab_size: usize,
    pub window: usize,
    /// Shape of the Gamma prior on the sense precision.
    pub a: f64,
    /// Rate of the Gamma prior on the sense precision.
    pub b: f64,
    /// Fixed precision of the word-parameter random walks.
    pub kappa_psi: f64,
    /// Standard deviation of the prior on the first time slice.
    pub sigma0: f64,
}

impl ModelConfig {
    pub const DEFAULT_SENSES: usize = 4;
    pub const DEFAULT_WINDOW: usize = 5;
    pub const DEFAULT_SIGMA0: f64 = 10.0;

    /// Dimensions with the default hyperparameters (`a = b = 1`,
    /// `kappa_psi = 100`, window 5, `sigma0 = 10`).
    pub fn new(senses: usize, genres: usize, time_bins: usize, vocab_size: usize) -> Self {
        ModelConfig {
            senses,
            genres,
            time_bins,
            vocab_size,
            window: Self::DEFAULT_WINDOW,
            a: 1.0,
            b: 1.0,
            kappa_psi: 100.0,
            sigma0: Self::DEFAULT_SIGMA0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.senses < 1 {
            problems.push("senses must be >= 1".to_string());
        }
        if self.genres < 1 {
            problems.push("genres must be >= 1".to_string());
        }
        if self.time_bins < 2 {
            problems.push("time_bins must be >= 2".to_string());
        }
        if self.vocab_size < 1 {
            problems.push("vocab_size must be >= 1".to_string());
        }
        if self.window < 1 {
            problems.push("window must be >= 1".to_string());
        }
        for (name, v) in [
            ("a", self.a),
            ("b", self.b),
            ("kappa_psi", self.kappa_psi),
            ("sigma0", self.sigma0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{name} must be positive and finite (got {v})"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    /// `[T, K, V]` unnormalized word-distribution parameters.
    pub chi: Array3<f64>,
    /// `[T, G, K]` unnormalized sense-distribution parameters.
    pub zeta: Array3<f64>,
    pub kappa_phi: f64,
    /// Sense assignment per snippet.
    pub z: Vec<usize>,
}

impl ModelState {
    /// `[T, K, V]` word distributions.
    pub fn psi(&self) -> Array3<f64> {
        softmax_lanes(&self.chi)
    }

    /// `[T, G, K]` sense distributions.
    pub fn phi(&self) -> Array3<f64> {
        softmax_lanes(&self.zeta)
    }

    pub fn check_dims(&self, config: &ModelConfig, n_snippets: usize) -> Result<()> {
        let (t, k, v) = (config.time_bins, config.senses, config.vocab_size);
        let g = config.genres;
        if self.chi.dim() != (t, k, v) {
            return Err(Error::Dimension(format!(
                "chi is {:?}, config expects {:?}",
                self.chi.dim(),
                (t, k, v)
            )));
        }
        if self.zeta.dim() != (t, g, k) {
            return Err(Error::Dimension(format!(
                "zeta is {:?}, config expects {:?}",
                self.zeta.dim(),
                (t, g, k)
            )));
        }
        if self.z.len() != n_snippets {
            return Err(Error::Dimension(format!(
                "{} sense assignments for {} snippets",
                self.z.len(),
                n_snippets
            )));
        }
        if let Some(&bad) = self.z.iter().find(|&&z| z >= k) {
            return Err(Error::Dimension(format!("sense index {bad} >= K = {k}")));
        }
        Ok(())
    }

    pub fn to_document(&self) -> StateDocument {
        let (t, k, v) = self.chi.dim();
        let g = self.zeta.dim().1;
        StateDocument {
            format: STATE_FORMAT.to_string(),
            version: STATE_VERSION,
            dims: StateDims {
                time_bins: t,
                genres: g,
                senses: k,
                vocab_size: v,
            },
            layout: STATE_LAYOUT.to_string(),
            chi: self.chi.iter().copied().collect(),
            zeta: self.zeta.iter().copied().collect(),
            kappa_phi: self.kappa_phi,
            z: self.z.clone(),
        }
    }

    pub fn from_document(doc: StateDocument) -> Result<Self> {
        if doc.format != STATE_FORMAT {
            return Err(Error::Invalid(format!("unexpected format `{}`", doc.format)));
        }
        if doc.version != STATE_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported state version {} (expected {STATE_VERSION})",
                doc.version
            )));
        }
        let d = doc.dims;
        let chi = Array3::from_shape_vec((d.time_bins, d.senses, d.vocab_size), doc.chi)
            .map_err(|e| Error::Dimension(format!("chi: {e}")))?;
        let zeta = Array3::from_shape_vec((d.time_bins, d.genres, d.senses), doc.zeta)
            .map_err(|e| Error::Dimension(format!("zeta: {e}")))?;
        if chi.iter().chain(zeta.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Invalid("non-finite parameter in state".into()));
        }
        if !(doc.kappa_phi.is_finite() && doc.kappa_phi > 0.0) {
            return Err(Error::Invalid("kappa_phi must be positive".into()));
        }
        if doc.z.iter().any(|&z| z >= d.senses) {
            return Err(Error::Invalid("sense assignment out of range".into()));
        }
        Ok(ModelState {
            chi,
            zeta,
            kappa_phi: doc.kappa_phi,
            z: doc.z,
        })
    }
}

pub const STATE_FORMAT: &str = "semchange-model-state";
pub const STATE_VERSION: u32 = 1;
pub const STATE_LAYOUT: &str = "row-major: chi[t][k][v], zeta[t][g][k]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDims {
    pub time_bins: usize,
    pub genres: usize,
    pub senses: usize,
    pub vocab_size: usize,
}

/// Versioned, flat JSON form of a [`ModelState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDocument {
    pub format: String,
    pub version: u32,
    pub dims: StateDims,
    pub layout: String,
    pub chi: Vec<f64>,
    pub zeta: Vec<f64>,
    pub kappa_phi: f64,
    pub z: Vec<usize>,
}

/// Exp-normalize a parameter vector.
pub fn softmax_slice(params: &[f64]) -> Vec<f64> {
    let max = params.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = params.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    out
}

pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.into_iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Floored log-probabilities `ln(max(softmax(params), PROB_FLOOR))`.
pub(crate) fn log_softmax_into(params: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
    let lse = log_sum_exp(params.iter().copied());
    let floor = PROB_FLOOR.ln();
    for (o, &x) in out.iter_mut().zip(params.iter()) {
        let v = x - lse;
        *o = if v.is_nan() { v } else { v.max(floor) };
    }
}

fn softmax_lanes(params: &Array3<f64>) -> Array3<f64> {
    let mut out = params.clone();
    for mut lane in out.lanes_mut(Axis(2)) {
        let p = softmax_slice(&lane.to_vec());
        lane.iter_mut().zip(p).for_each(|(o, x)| *o = x);
    }
    out
}

fn normal_log_density(x: f64, mean: f64, precision: f64) -> f64 {
    0.5 * (precision.ln() - LN_2PI) - 0.5 * precision * (x - mean) * (x - mean)
}

/// Log density of a `[T, N]` array of random-walk paths: a `N(0, sigma0²)`
/// prior on row 0 and `N(row[t-1], 1/precision)` increments afterwards.
pub fn temporal_log_prior(params: ArrayView2<f64>, precision: f64, sigma0: f64) -> f64 {
    let init_precision = 1.0 / (sigma0 * sigma0);
    let mut total = 0.0;
    for &x in params.row(0) {
        total += normal_log_density(x, 0.0, init_precision);
    }
    for t in 1..params.nrows() {
        for (x, prev) in params.row(t).iter().zip(params.row(t - 1)) {
            total += normal_log_density(*x, *prev, precision);
        }
    }
    total
}

/// Gamma log density in shape/rate form.
pub fn gamma_log_density(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Sum of `ln phi[t][g][z] + sum_w ln psi[t][z][w]` over snippets.
pub fn log_likelihood(state: &ModelState, snippets: &[Snippet]) -> f64 {
    let log_phi = state.phi().mapv(|p| p.max(PROB_FLOOR).ln());
    let log_psi = state.psi().mapv(|p| p.max(PROB_FLOOR).ln());
    snippets
        .iter()
        .zip(&state.z)
        .map(|(s, &z)| {
            log_phi[[s.time_bin, s.genre, z]]
                + s.context
                    .iter()
                    .map(|&w| log_psi[[s.time_bin, z, w as usize]])
                    .sum::<f64>()
        })
        .sum()
}

/// Log prior of the parameters: the random walks on `chi` and `zeta` and the
/// Gamma prior on `kappa_phi`.
pub fn log_prior(state: &ModelState, config: &ModelConfig) -> f64 {
    let mut total = 0.0;
    for k in 0..config.senses {
        total += temporal_log_prior(state.chi.slice(s![.., k, ..]), config.kappa_psi, config.sigma0);
    }
    for g in 0..config.genres {
        total += temporal_log_prior(
            state.zeta.slice(s![.., g, ..]),
            state.kappa_phi,
            config.sigma0,
        );
    }
    total + gamma_log_density(state.kappa_phi, config.a, config.b)
}

/// Joint log density of parameters, assignments and observed snippets.
pub fn log_joint(state: &ModelState, snippets: &[Snippet], config: &ModelConfig) -> Result<f64> {
    config.validate()?;
    state.check_dims(config, snippets.len())?;
    check_snippets(snippets, config)?;
    Ok(log_prior(state, config) + log_likelihood(state, snippets))
}

pub(crate) fn check_snippets(snippets: &[Snippet], config: &ModelConfig) -> Result<()> {
    for s in snippets {
        if s.time_bin >= config.time_bins || s.genre >= config.genres {
            return Err(Error::Dimension(format!(
                "snippet {} has bin {} / genre {} outside {}x{}",
                s.id, s.time_bin, s.genre, config.time_bins, config.genres
            )));
        }
        if let Some(&w) = s.context.iter().find(|&&w| w as usize >= config.vocab_size) {
            return Err(Error::Dimension(format!(
                "snippet {} has word index {w} >= V = {}",
                s.id, config.vocab_size
            )));
        }
    }
    Ok(())
}

/// Draw `[T, N]` random-walk paths from the temporal prior.
pub fn sample_temporal_prior<R: Rng + ?Sized>(
    rng: &mut R,
    time_bins: usize,
    width: usize,
    precision: f64,
    sigma0: f64,
) -> Array2<f64> {
    let init = Normal::new(0.0, sigma0).expect("sigma0 > 0");
    let step = Normal::new(0.0, precision.sqrt().recip()).expect("precision > 0");
    let mut out = Array2::zeros((time_bins, width));
    for j in 0..width {
        out[[0, j]] = init.sample(rng);
    }
    for t in 1..time_bins {
        for j in 0..width {
            out[[t, j]] = out[[t - 1, j]] + step.sample(rng);
        }
    }
    out
}

/// Planted trajectories for simulation. Missing parts are drawn from the prior.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    /// `[T][G][K]` sense distributions.
    #[serde(default)]
    pub phi: Option<Vec<Vec<Vec<f64>>>>,
    /// `[T][K][V]` word distributions.
    #[serde(default)]
    pub psi: Option<Vec<Vec<Vec<f64>>>>,
    /// Genre proportions used when snippets are allocated per bin.
    #[serde(default)]
    pub genre_proportions: Option<Vec<f64>>,
}

/// How many snippets to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocation {
    /// `n` snippets per time bin, genres drawn from the genre proportions.
    PerBin(usize),
    /// `n` snippets for every (time bin, genre) pair.
    PerBinGenre(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub snippets: Vec<Snippet>,
    pub true_z: Vec<usize>,
    pub true_state: ModelState,
}

fn nested_to_array(
    name: &str,
    nested: &[Vec<Vec<f64>>],
    dims: (usize, usize, usize),
) -> Result<Array3<f64>> {
    let mismatch = || {
        Error::Dimension(format!(
            "{name} must have shape {}x{}x{}",
            dims.0, dims.1, dims.2
        ))
    };
    if nested.len() != dims.0 {
        return Err(mismatch());
    }
    let mut out = Array3::zeros(dims);
    for (i, plane) in nested.iter().enumerate() {
        if plane.len() != dims.1 {
            return Err(mismatch());
        }
        for (j, row) in plane.iter().enumerate() {
            if row.len() != dims.2 {
                return Err(mismatch());
            }
            if row.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
                return Err(Error::Invalid(format!("{name}[{i}][{j}] has a negative entry")));
            }
            let sum: f64 = row.iter().sum();
            if sum <= 0.0 {
                return Err(Error::Invalid(format!("{name}[{i}][{j}] sums to zero")));
            }
            for (l, &p) in row.iter().enumerate() {
                out[[i, j, l]] = p / sum;
            }
        }
    }
    Ok(out)
}

/// Lemma name of simulated vocabulary word `index`; zero-padded so that
/// lexicographic order equals index order.
pub fn synthetic_lemma(index: usize, vocab_size: usize) -> String {
    let width = vocab_size.saturating_sub(1).to_string().len();
    format!("w{index:0width$}")
}

/// Generate a synthetic corpus from the generative model.
pub fn forward_simulate(
    config: &ModelConfig,
    spec: &TrajectorySpec,
    allocation: Allocation,
    seed: u64,
) -> Result<SyntheticCorpus> {
    config.validate()?;
    let (t_n, g_n, k_n, v_n) = (
        config.time_bins,
        config.genres,
        config.senses,
        config.vocab_size,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let genre_weights = match &spec.genre_proportions {
        Some(p) if p.len() != g_n => {
            return Err(Error::Dimension(format!(
                "{} genre proportions for {g_n} genres",
                p.len()
            )))
        }
        Some(p) => p.clone(),
        None => vec![1.0; g_n],
    };
    let genre_dist = WeightedIndex::new(&genre_weights)
        .map_err(|e| Error::Invalid(format!("genre proportions: {e}")))?;

    let planted_phi = spec
        .phi
        .as_deref()
        .map(|p| nested_to_array("phi", p, (t_n, g_n, k_n)))
        .transpose()?;
    let planted_psi = spec
        .psi
        .as_deref()
        .map(|p| nested_to_array("psi", p, (t_n, k_n, v_n)))
        .transpose()?;

    let kappa_phi = match planted_phi {
        Some(_) => config.a / config.b,
        None => Gamma::new(config.a, 1.0 / config.b)
            .expect("validated hyperparameters")
            .sample(&mut rng),
    };
    let floor = PROB_FLOOR.ln();
    let zeta = match planted_phi {
        Some(phi) => phi.mapv(|p| p.ln().max(floor)),
        None => {
            let mut zeta = Array3::zeros((t_n, g_n, k_n));
            for g in 0..g_n {
                let paths = sample_temporal_prior(&mut rng, t_n, k_n, kappa_phi, config.sigma0);
                zeta.slice_mut(s![.., g, ..]).assign(&paths);
            }
            zeta
        }
    };
    let chi = match planted_psi {
        Some(psi) => psi.mapv(|p| p.ln().max(floor)),
        None => {
            let mut chi = Array3::zeros((t_n, k_n, v_n));
            for k in 0..k_n {
                let paths =
                    sample_temporal_prior(&mut rng, t_n, v_n, config.kappa_psi, config.sigma0);
                chi.slice_mut(s![.., k, ..]).assign(&paths);
            }
            chi
        }
    };
    let mut state = ModelState {
        chi,
        zeta,
        kappa_phi,
        z: Vec::new(),
    };
    let phi = state.phi();
    let psi = state.psi();

    let sense_dists: Vec<Vec<WeightedIndex<f64>>> = (0..t_n)
        .map(|t| {
            (0..g_n)
                .map(|g| WeightedIndex::new(phi.slice(s![t, g, ..]).iter().copied()))
                .collect::<std::result::Result<_, _>>()
        })
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Degenerate(format!("sense distribution: {e}")))?;
    let word_dists: Vec<Vec<WeightedIndex<f64>>> = (0..t_n)
        .map(|t| {
            (0..k_n)
                .map(|k| WeightedIndex::new(psi.slice(s![t, k, ..]).iter().copied()))
                .collect::<std::result::Result<_, _>>()
        })
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Degenerate(format!("word distribution: {e}")))?;

    let context_len = 2 * config.window;
    let mut snippets = Vec::new();
    let mut true_z = Vec::new();
    let mut emit = |t: usize, g: usize, i: usize, rng: &mut ChaCha8Rng| {
        let z = sense_dists[t][g].sample(rng);
        let context = (0..context_len)
            .map(|_| word_dists[t][z].sample(rng) as u32)
            .collect();
        snippets.push(Snippet {
            id: snippets.len(),
            time_bin: t,
            genre: g,
            context,
            doc_id: format!("sim-t{t}-g{g}-{i}"),
        });
        true_z.push(z);
    };
    for t in 0..t_n {
        match allocation {
            Allocation::PerBin(n) => {
                for i in 0..n {
                    let g = genre_dist.sample(&mut rng);
                    emit(t, g, i, &mut rng);
                }
            }
            Allocation::PerBinGenre(n) => {
                for g in 0..g_n {
                    for i in 0..n {
                        emit(t, g, i, &mut rng);
                    }
                }
            }
        }
    }
    state.z = true_z.clone();
    Ok(SyntheticCorpus {
        snippets,
        true_z,
        true_state: state,
    })
}

impl SyntheticCorpus {
    /// One document per snippet: the first half of the context, the target,
    /// then the rest. Time values are bin indices; genres are `genre_labels`.
    pub fn to_documents(
        &self,
        target: &str,
        vocab_size: usize,
        genre_labels: &[String],
    ) -> Vec<Document> {
        self.snippets
            .iter()
            .map(|s| {
                let words: Vec<String> = s
                    .context
                    .iter()
                    .map(|&w| synthetic_lemma(w as usize, vocab_size))
                    .collect();
                let half = words.len() / 2;
                let mut lemmas = words[..half].to_vec();
                lemmas.push(target.to_string());
                lemmas.extend_from_slice(&words[half..]);
                Document {
                    doc_id: s.doc_id.clone(),
                    time_value: s.time_bin as i64,
                    genre: genre_labels[s.genre].clone(),
                    lemmas,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax_slice(&[0.0; 4]), vec![0.25; 4]);
        let p = softmax_slice(&[9f64.ln(), 0.0]);
        assert_abs_diff_eq!(p[0], 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.1, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn softmax_normalizes_and_is_shift_invariant(
            xs in prop::collection::vec(-50.0f64..50.0, 1..20),
            c in -100.0f64..100.0,
        ) {
            let p = softmax_slice(&xs);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            for (a, b) in p.iter().zip(softmax_slice(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn temporal_prior_zero_increments() {
        let p = 4.0;
        let constant = array![[0.5, -1.0], [0.5, -1.0], [0.5, -1.0]];
        let init_only: f64 = [0.5f64, -1.0]
            .iter()
            .map(|&x| normal_log_density(x, 0.0, 1.0 / 100.0))
            .sum();
        let increments = temporal_log_prior(constant.view(), p, 10.0) - init_only;
        // Each increment term sits at its maximum 0.5*ln(p/2pi).
        assert_abs_diff_eq!(increments, 4.0 * 0.5 * (p.ln() - LN_2PI), epsilon = 1e-12);
    }

    #[test]
    fn doubling_last_increment_costs_three_halves_p_delta_sq() {
        let (p, delta) = (3.0, 0.7);
        let a = array![[0.2], [0.2 + delta]];
        let b = array![[0.2], [0.2 + 2.0 * delta]];
        let diff = temporal_log_prior(a.view(), p, 10.0) - temporal_log_prior(b.view(), p, 10.0);
        assert_abs_diff_eq!(diff, 1.5 * p * delta * delta, epsilon = 1e-12);
    }

    #[test]
    fn larger_precision_penalizes_nonconstant_paths() {
        let path = array![[0.0], [1.0], [0.5]];
        let mut last = f64::INFINITY;
        // Beyond p = 1/(sum of squared increments) the quadratic term dominates.
        for p in [2.0, 4.0, 8.0, 16.0] {
            let lp = temporal_log_prior(path.view(), p, 10.0);
            assert!(lp < last);
            last = lp;
        }
    }

    fn one_snippet_state() -> (ModelConfig, ModelState, Vec<Snippet>) {
        let config = ModelConfig::new(1, 1, 2, 2);
        let state = ModelState {
            chi: Array3::zeros((2, 1, 2)),
            zeta: Array3::zeros((2, 1, 1)),
            kappa_phi: 1.0,
            z: vec![0],
        };
        let snippets = vec![Snippet {
            id: 0,
            time_bin: 0,
            genre: 0,
            context: vec![1],
            doc_id: "d".into(),
        }];
        (config, state, snippets)
    }

    #[test]
    fn likelihood_of_single_uniform_snippet() {
        let (config, state, snippets) = one_snippet_state();
        assert_abs_diff_eq!(log_likelihood(&state, &snippets), 0.5f64.ln(), epsilon = 1e-15);
        let joint = log_joint(&state, &snippets, &config).unwrap();
        let empty = ModelState {
            z: vec![],
            ..state.clone()
        };
        let prior_only = log_joint(&empty, &[], &config).unwrap();
        assert_abs_diff_eq!(prior_only, log_prior(&state, &config), epsilon = 1e-12);
        assert_abs_diff_eq!(joint - prior_only, 0.5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn duplicated_snippet_adds_its_term_again() {
        let config = ModelConfig::new(2, 1, 2, 3);
        let sim = forward_simulate(&config, &TrajectorySpec::default(), Allocation::PerBin(5), 3)
            .unwrap();
        let state = sim.true_state.clone();
        let base = log_joint(&state, &sim.snippets, &config).unwrap();
        let mut doubled = sim.snippets.clone();
        doubled.push(sim.snippets[2].clone());
        let mut state2 = state.clone();
        state2.z.push(state.z[2]);
        let single = log_likelihood(
            &ModelState {
                z: vec![state.z[2]],
                ..state.clone()
            },
            &sim.snippets[2..3],
        );
        let extra = log_joint(&state2, &doubled, &config).unwrap();
        assert_abs_diff_eq!(extra - base, single, epsilon = 1e-9);
    }

    #[test]
    fn log_joint_decomposes_over_disjoint_snippet_sets() {
        let config = ModelConfig::new(3, 2, 3, 6);
        let sim = forward_simulate(&config, &TrajectorySpec::default(), Allocation::PerBin(8), 11)
            .unwrap();
        let (a, b) = sim.snippets.split_at(10);
        let state_a = ModelState {
            z: sim.true_z[..10].to_vec(),
            ..sim.true_state.clone()
        };
        let state_b = ModelState {
            z: sim.true_z[10..].to_vec(),
            ..sim.true_state.clone()
        };
        let whole = log_joint(&sim.true_state, &sim.snippets, &config).unwrap();
        let split = log_joint(&state_a, a, &config).unwrap() + log_likelihood(&state_b, b);
        assert_abs_diff_eq!(whole, split, epsilon = 1e-8);
    }

    #[test]
    fn log_joint_rejects_mismatched_dimensions() {
        let (mut config, state, snippets) = one_snippet_state();
        config.vocab_size = 3;
        assert!(matches!(
            log_joint(&state, &snippets, &config),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn simulation_single_sense_and_empty() {
        let config = ModelConfig::new(1, 2, 3, 5);
        let sim = forward_simulate(&config, &TrajectorySpec::default(), Allocation::PerBin(20), 1)
            .unwrap();
        assert_eq!(sim.snippets.len(), 60);
        assert!(sim.true_z.iter().all(|&z| z == 0));

        let sim = forward_simulate(&config, &TrajectorySpec::default(), Allocation::PerBin(0), 1)
            .unwrap();
        assert!(sim.snippets.is_empty());
        assert!(sim.true_state.check_dims(&config, 0).is_ok());
        for lane in sim.true_state.psi().lanes(Axis(2)) {
            assert_abs_diff_eq!(lane.sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn simulation_is_reproducible() {
        let config = ModelConfig::new(3, 2, 3, 10);
        let a = forward_simulate(&config, &TrajectorySpec::default(), Allocation::PerBin(30), 99)
            .unwrap();
        let b = forward_simulate(&config, &TrajectorySpec::default(), Allocation::PerBin(30), 99)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn balanced_senses_split_binomially() {
        let mut config = ModelConfig::new(2, 1, 2, 4);
        config.window = 1;
        let spec = TrajectorySpec {
            phi: Some(vec![vec![vec![0.5, 0.5]]; 2]),
            psi: Some(vec![vec![vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.5, 0.5]]; 2]),
            genre_proportions: None,
        };
        let sim = forward_simulate(&config, &spec, Allocation::PerBin(5000), 5).unwrap();
        let n = sim.true_z.len() as f64;
        let ones = sim.true_z.iter().filter(|&&z| z == 1).count() as f64;
        assert!((ones - n / 2.0).abs() < 3.0 * (n * 0.25).sqrt());
        // Disjoint supports: words reveal the planted sense.
        for (s, &z) in sim.snippets.iter().zip(&sim.true_z) {
            assert!(s.context.iter().all(|&w| (w as usize) / 2 == z));
        }
    }

    #[test]
    fn word_frequencies_converge_to_mixture() {
        let mut config = ModelConfig::new(3, 1, 2, 6);
        config.window = 5;
        let sim = forward_simulate(&config, &TrajectorySpec::default(), Allocation::PerBin(20_000), 8)
            .unwrap();
        let phi = sim.true_state.phi();
        let psi = sim.true_state.psi();
        for t in 0..2 {
            let mut counts = [0f64; 6];
            let mut total = 0.0;
            for s in sim.snippets.iter().filter(|s| s.time_bin == t) {
                for &w in &s.context {
                    counts[w as usize] += 1.0;
                    total += 1.0;
                }
            }
            for (v, count) in counts.iter().enumerate() {
                let expected: f64 = (0..3).map(|k| phi[[t, 0, k]] * psi[[t, k, v]]).sum();
                let freq = count / total;
                // Words within a snippet share a sense, so the effective sample
                // is the snippet count.
                let se = (expected * (1.0 - expected) / 20_000.0).sqrt();
                assert!((freq - expected).abs() < 5.0 * se + 1e-9, "t{t} v{v}: {freq} vs {expected}");
            }
        }
    }

    #[test]
    fn state_document_round_trip() {
        let config = ModelConfig::new(2, 2, 3, 4);
        let sim = forward_simulate(&config, &TrajectorySpec::default(), Allocation::PerBin(3), 2)
            .unwrap();
        let json = serde_json::to_string(&sim.true_state.to_document()).unwrap();
        let back = ModelState::from_document(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, sim.true_state);

        let mut doc = sim.true_state.to_document();
        doc.version = 99;
        assert!(ModelState::from_document(doc).is_err());
    }

    #[test]
    fn synthetic_lemmas_sort_by_index() {
        let names: Vec<String> = (0..120).map(|i| synthetic_lemma(i, 120)).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        assert_eq!(synthetic_lemma(7, 120), "w007");
    }
}
