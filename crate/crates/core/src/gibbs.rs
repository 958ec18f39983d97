//! Blocked Gibbs sampler for the genre-aware sense model.
//!
//! One sweep resamples, in order: the sense assignment of every snippet from
//! its full conditional, the sense parameters `zeta`, the word parameters
//! `chi`, and the sense precision `kappa_phi` from its conjugate Gamma
//! conditional.
//!
//! Sense and word parameters are logistic-normal and are updated with the
//! auxiliary-variable scheme: for a coordinate `x` of a softmax row with `n`
//! of the row's `N` counts, the likelihood factors as
//! `exp(n x) * (C / (exp(x) + C))^N` with `C` the sum of the other
//! exponentials. Drawing `u ~ U(0, (C / (exp(x) + C))^N)` turns the conditional
//! into a Gaussian truncated from above, which is sampled exactly. The same
//! device is applied to two translation moves per block: shifting a whole
//! time path (which the random-walk coupling otherwise makes very slow) and
//! shifting a whole softmax row (which leaves the likelihood unchanged).
//!
//! Sense labels are not post-processed for label switching.

use ndarray::{s, Array2, Array3, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Snippet;
use crate::error::{Error, Result};
use crate::model::{
    self, log_softmax_into, sample_temporal_prior, ModelConfig, ModelState, StateDocument,
    StateDims,
};
use crate::truncnorm::sample_below;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Total sweeps, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    /// Threads for the assignment step. Results do not depend on it.
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Keep the sense assignments of every retained sample.
    #[serde(default)]
    pub record_assignments: bool,
}

fn default_workers() -> usize {
    1
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 2500,
            burn_in: 100,
            thinning: 1,
            seed: 0,
            workers: 1,
            record_assignments: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thinning == 0 {
            return Err(Error::Config("thinning must be positive".into()));
        }
        Ok(())
    }

    /// Number of samples `run_chain` retains.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thinning)
    }
}

/// Named hyperparameter settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `a = b = 1`, `kappa_psi = 100`, 2500 iterations.
    LatinDefault,
    /// `a = 7`, `b = 3`, `kappa_psi = 10`, 10000 iterations.
    GreekGasc,
    /// Latin hyperparameters with all genres collapsed into one.
    Scan,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::LatinDefault, Preset::GreekGasc, Preset::Scan];

    pub fn name(self) -> &'static str {
        match self {
            Preset::LatinDefault => "latin-default",
            Preset::GreekGasc => "greek-gasc",
            Preset::Scan => "scan",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))
    }

    /// `(a, b, kappa_psi)`.
    pub fn hyperparameters(self) -> (f64, f64, f64) {
        match self {
            Preset::LatinDefault | Preset::Scan => (1.0, 1.0, 100.0),
            Preset::GreekGasc => (7.0, 3.0, 10.0),
        }
    }

    pub fn iterations(self) -> usize {
        match self {
            Preset::LatinDefault | Preset::Scan => 2500,
            Preset::GreekGasc => 10_000,
        }
    }

    pub fn collapses_genres(self) -> bool {
        matches!(self, Preset::Scan)
    }

    pub fn model_config(
        self,
        senses: usize,
        genres: usize,
        time_bins: usize,
        vocab_size: usize,
    ) -> ModelConfig {
        let (a, b, kappa_psi) = self.hyperparameters();
        let genres = if self.collapses_genres() { 1 } else { genres };
        ModelConfig {
            a,
            b,
            kappa_psi,
            ..ModelConfig::new(senses, genres, time_bins, vocab_size)
        }
    }

    pub fn sampler_config(self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            iterations: self.iterations(),
            seed,
            ..SamplerConfig::default()
        }
    }
}

/// Normalized full conditional of one snippet's sense given the parameters.
pub fn sense_conditional(snippet: &Snippet, state: &ModelState) -> Result<Vec<f64>> {
    let (log_phi, log_psi) = log_tables(state);
    let weights = sense_log_weights(snippet, &log_phi, &log_psi);
    normalize_log_weights(weights)
}

/// Draw one snippet's sense from its full conditional.
pub fn sample_sense_assignment<R: Rng + ?Sized>(
    snippet: &Snippet,
    state: &ModelState,
    rng: &mut R,
) -> Result<usize> {
    let p = sense_conditional(snippet, state)?;
    Ok(draw_categorical(&p, rng.random()))
}

fn log_tables(state: &ModelState) -> (Array3<f64>, Array3<f64>) {
    let mut log_phi = Array3::zeros(state.zeta.dim());
    for (src, dst) in state
        .zeta
        .lanes(Axis(2))
        .into_iter()
        .zip(log_phi.lanes_mut(Axis(2)))
    {
        log_softmax_into(src, dst);
    }
    let mut log_psi = Array3::zeros(state.chi.dim());
    for (src, dst) in state
        .chi
        .lanes(Axis(2))
        .into_iter()
        .zip(log_psi.lanes_mut(Axis(2)))
    {
        log_softmax_into(src, dst);
    }
    (log_phi, log_psi)
}

fn sense_log_weights(snippet: &Snippet, log_phi: &Array3<f64>, log_psi: &Array3<f64>) -> Vec<f64> {
    let t = snippet.time_bin;
    let senses = log_phi.dim().2;
    (0..senses)
        .map(|k| {
            let row = log_psi.slice(s![t, k, ..]);
            log_phi[[t, snippet.genre, k]]
                + snippet.context.iter().map(|&w| row[w as usize]).sum::<f64>()
        })
        .collect()
}

fn normalize_log_weights(mut weights: Vec<f64>) -> Result<Vec<f64>> {
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if weights.iter().any(|w| w.is_nan()) {
        return Err(Error::Degenerate("NaN in the assignment conditional".into()));
    }
    if !max.is_finite() {
        return Err(Error::Degenerate(
            "all sense weights underflow in the assignment conditional".into(),
        ));
    }
    let mut sum = 0.0;
    for w in weights.iter_mut() {
        *w = (*w - max).exp();
        sum += *w;
    }
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(weights)
}

fn draw_categorical(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &pk) in p.iter().enumerate() {
        acc += pk;
        if u < acc {
            return k;
        }
    }
    p.len() - 1
}

/// Running `sum_j exp(x[j] - shift)` for one softmax row.
struct RowNormalizer {
    shift: f64,
    sum: f64,
    updates: u32,
}

const RENORMALIZE_EVERY: u32 = 64;

impl RowNormalizer {
    fn new(row: ArrayView1<f64>) -> Self {
        let shift = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum = row.iter().map(|&x| (x - shift).exp()).sum();
        RowNormalizer {
            shift,
            sum,
            updates: 0,
        }
    }

    /// `ln sum_{j' != j} exp(row[j'])`.
    fn log_sum_excluding(&self, row: ArrayView1<f64>, j: usize) -> f64 {
        let rest = self.sum - (row[j] - self.shift).exp();
        if rest > self.sum * 1e-9 {
            return rest.ln() + self.shift;
        }
        model::log_sum_exp(
            row.iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, &x)| x),
        )
    }

    fn replace(&mut self, row: ArrayView1<f64>, old: f64, new: f64) {
        self.updates += 1;
        if new - self.shift > 30.0 || self.updates >= RENORMALIZE_EVERY {
            *self = RowNormalizer::new(row);
            return;
        }
        self.sum += (new - self.shift).exp() - (old - self.shift).exp();
        if !(self.sum.is_finite() && self.sum > 0.0) {
            *self = RowNormalizer::new(row);
        }
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn ln_expm1(r: f64) -> f64 {
    if r > 30.0 {
        r + (-(-r).exp()).ln_1p()
    } else {
        r.exp_m1().ln()
    }
}

/// Draw the auxiliary variable for a coordinate currently at `current` and
/// return the implied upper bound on that coordinate.
fn slice_upper_bound<R: Rng + ?Sized>(rng: &mut R, current: f64, log_rest: f64, total: f64) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let r = softplus(current - log_rest) - u.ln() / total;
    log_rest + ln_expm1(r)
}

/// Gaussian conditional of path coordinate `(t, j)` given its temporal
/// neighbours: `(precision, mean)`.
fn site_prior(x: &ArrayViewMut2<f64>, t: usize, j: usize, precision: f64, init_precision: f64) -> (f64, f64) {
    let last = x.nrows() - 1;
    let mut prec = if t == 0 { init_precision } else { precision };
    let mut weighted = if t == 0 { 0.0 } else { precision * x[[t - 1, j]] };
    if t < last {
        prec += precision;
        weighted += precision * x[[t + 1, j]];
    }
    (prec, weighted / prec)
}

/// One auxiliary-variable pass over a `[T, J]` block of logistic-normal
/// random-walk paths with multinomial counts `[T, J]` and row totals `[T]`.
fn update_logistic_normal_block<R: Rng + ?Sized>(
    mut x: ArrayViewMut2<f64>,
    counts: ArrayView2<u32>,
    totals: ArrayView1<u32>,
    precision: f64,
    sigma0: f64,
    rng: &mut R,
) {
    let (time_bins, width) = x.dim();
    if width == 1 {
        // A one-element softmax is constant, so the paths see only the prior.
        let path = sample_temporal_prior(rng, time_bins, 1, precision, sigma0);
        x.assign(&path);
        return;
    }
    let init_precision = 1.0 / (sigma0 * sigma0);
    let mut norms: Vec<RowNormalizer> = (0..time_bins).map(|t| RowNormalizer::new(x.row(t))).collect();

    for j in 0..width {
        for t in 0..time_bins {
            let (prec, mean) = site_prior(&x, t, j, precision, init_precision);
            let current = x[[t, j]];
            let upper = if totals[t] == 0 {
                f64::INFINITY
            } else {
                let log_rest = norms[t].log_sum_excluding(x.row(t), j);
                slice_upper_bound(rng, current, log_rest, totals[t] as f64)
            };
            let mean = mean + counts[[t, j]] as f64 / prec;
            let new = sample_below(rng, mean, prec.sqrt().recip(), upper);
            x[[t, j]] = new;
            norms[t].replace(x.row(t), current, new);
        }

        // Shift the whole path of column j: the increments are untouched, so
        // the level only sees the initial-slice prior and the likelihood.
        let level = x[[0, j]];
        let mut upper = f64::INFINITY;
        let mut count_sum = 0.0;
        for t in 0..time_bins {
            count_sum += counts[[t, j]] as f64;
            if totals[t] > 0 {
                let log_rest = norms[t].log_sum_excluding(x.row(t), j);
                let bound = slice_upper_bound(rng, x[[t, j]], log_rest, totals[t] as f64);
                upper = upper.min(bound - (x[[t, j]] - level));
            }
        }
        let variance = sigma0 * sigma0;
        let new_level = sample_below(rng, variance * count_sum, sigma0, upper);
        let delta = new_level - level;
        for t in 0..time_bins {
            let old = x[[t, j]];
            x[[t, j]] = old + delta;
            norms[t].replace(x.row(t), old, old + delta);
        }
    }

    // Shift a whole row: softmax is invariant, so this is an exact draw from
    // the Gaussian prior along that direction.
    for t in 0..time_bins {
        let mut prec = 0.0;
        let mut gap = 0.0;
        for j in 0..width {
            let (p, mean) = site_prior(&x, t, j, precision, init_precision);
            prec = p;
            gap += mean - x[[t, j]];
        }
        let n = width as f64;
        let z: f64 = StandardNormal.sample(rng);
        let c = gap / n + z / (n * prec).sqrt();
        x.row_mut(t).mapv_inplace(|v| v + c);
    }
}

/// Sampler state plus sufficient statistics of the current assignments.
pub struct Sampler<'a> {
    config: ModelConfig,
    snippets: &'a [Snippet],
    state: ModelState,
    word_counts: Array3<u32>,
    word_totals: Array2<u32>,
    sense_counts: Array3<u32>,
    sense_totals: Array2<u32>,
    rng: ChaCha8Rng,
    assignment_stream: ChaCha8Rng,
    iteration: u64,
    workers: usize,
}

impl<'a> Sampler<'a> {
    /// Start from a prior draw: `kappa_phi` from its Gamma prior, `zeta` and
    /// `chi` from the temporal prior, assignments uniformly at random.
    pub fn new(snippets: &'a [Snippet], config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        model::check_snippets(snippets, config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (t_n, g_n, k_n, v_n) = (
            config.time_bins,
            config.genres,
            config.senses,
            config.vocab_size,
        );
        let kappa_phi = Gamma::new(config.a, 1.0 / config.b)
            .expect("validated hyperparameters")
            .sample(&mut rng);
        let mut zeta = Array3::zeros((t_n, g_n, k_n));
        for g in 0..g_n {
            let paths = sample_temporal_prior(&mut rng, t_n, k_n, kappa_phi, config.sigma0);
            zeta.slice_mut(s![.., g, ..]).assign(&paths);
        }
        let mut chi = Array3::zeros((t_n, k_n, v_n));
        for k in 0..k_n {
            let paths = sample_temporal_prior(&mut rng, t_n, v_n, config.kappa_psi, config.sigma0);
            chi.slice_mut(s![.., k, ..]).assign(&paths);
        }
        let z = (0..snippets.len())
            .map(|_| rng.random_range(0..k_n))
            .collect();
        let state = ModelState {
            chi,
            zeta,
            kappa_phi,
            z,
        };
        Self::build(snippets, config, state, rng)
    }

    /// Continue from an explicit state.
    pub fn with_state(
        snippets: &'a [Snippet],
        config: &ModelConfig,
        state: ModelState,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        model::check_snippets(snippets, config)?;
        state.check_dims(config, snippets.len())?;
        Self::build(snippets, config, state, ChaCha8Rng::seed_from_u64(seed))
    }

    fn build(
        snippets: &'a [Snippet],
        config: &ModelConfig,
        state: ModelState,
        mut rng: ChaCha8Rng,
    ) -> Result<Self> {
        let mut key = [0u8; 32];
        rng.fill_bytes(&mut key);
        let (t_n, g_n, k_n, v_n) = (
            config.time_bins,
            config.genres,
            config.senses,
            config.vocab_size,
        );
        let mut sampler = Sampler {
            config: config.clone(),
            snippets,
            state,
            word_counts: Array3::zeros((t_n, k_n, v_n)),
            word_totals: Array2::zeros((t_n, k_n)),
            sense_counts: Array3::zeros((t_n, g_n, k_n)),
            sense_totals: Array2::zeros((t_n, g_n)),
            rng,
            assignment_stream: ChaCha8Rng::from_seed(key),
            iteration: 0,
            workers: 1,
        };
        sampler.recount();
        Ok(sampler)
    }

    pub fn set_workers(&mut self, workers: usize) {
        self.workers = workers.max(1);
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn into_state(self) -> ModelState {
        self.state
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Overwrite the assignments (and the derived counts).
    pub fn set_assignments(&mut self, z: Vec<usize>) -> Result<()> {
        if z.len() != self.snippets.len() || z.iter().any(|&k| k >= self.config.senses) {
            return Err(Error::Dimension("invalid assignment vector".into()));
        }
        self.state.z = z;
        self.recount();
        Ok(())
    }

    pub fn sense_counts(&self) -> &Array3<u32> {
        &self.sense_counts
    }

    fn recount(&mut self) {
        self.word_counts.fill(0);
        self.word_totals.fill(0);
        self.sense_counts.fill(0);
        self.sense_totals.fill(0);
        for (s, &k) in self.snippets.iter().zip(&self.state.z) {
            self.sense_counts[[s.time_bin, s.genre, k]] += 1;
            self.sense_totals[[s.time_bin, s.genre]] += 1;
            for &w in &s.context {
                self.word_counts[[s.time_bin, k, w as usize]] += 1;
            }
            self.word_totals[[s.time_bin, k]] += s.context.len() as u32;
        }
    }

    /// z, then zeta, then chi, then kappa_phi.
    pub fn sweep(&mut self) -> Result<()> {
        self.sample_assignments()?;
        self.update_sense_params();
        self.update_word_params();
        self.update_precision();
        Ok(())
    }

    /// Resample every assignment. Snippet `d` in sweep `i` draws from its own
    /// keystream position, so results do not depend on the worker count.
    pub fn sample_assignments(&mut self) -> Result<()> {
        let (log_phi, log_psi) = log_tables(&self.state);
        let mut stream = self.assignment_stream.clone();
        stream.set_stream(self.iteration);
        self.iteration += 1;

        let draw = |d: usize, snippet: &Snippet| -> Result<usize> {
            let mut rng = stream.clone();
            rng.set_word_pos(d as u128 * 16);
            let p = normalize_log_weights(sense_log_weights(snippet, &log_phi, &log_psi))?;
            Ok(draw_categorical(&p, rng.random()))
        };
        let z: Result<Vec<usize>> = if self.workers > 1 {
            self.snippets
                .par_iter()
                .enumerate()
                .map(|(d, s)| draw(d, s))
                .collect()
        } else {
            self.snippets
                .iter()
                .enumerate()
                .map(|(d, s)| draw(d, s))
                .collect()
        };
        self.state.z = z?;
        self.recount();
        Ok(())
    }

    /// Resample `zeta` given the per-(bin, genre) sense counts.
    pub fn update_sense_params(&mut self) {
        for g in 0..self.config.genres {
            update_logistic_normal_block(
                self.state.zeta.slice_mut(s![.., g, ..]),
                self.sense_counts.slice(s![.., g, ..]),
                self.sense_totals.slice(s![.., g]),
                self.state.kappa_phi,
                self.config.sigma0,
                &mut self.rng,
            );
        }
    }

    /// Resample `chi` given the per-(bin, sense) word counts.
    pub fn update_word_params(&mut self) {
        for k in 0..self.config.senses {
            update_logistic_normal_block(
                self.state.chi.slice_mut(s![.., k, ..]),
                self.word_counts.slice(s![.., k, ..]),
                self.word_totals.slice(s![.., k]),
                self.config.kappa_psi,
                self.config.sigma0,
                &mut self.rng,
            );
        }
    }

    /// Draw `kappa_phi` from `Gamma(a + G K (T-1) / 2, b + sum(increments²) / 2)`.
    pub fn update_precision(&mut self) {
        let (shape, rate) = precision_posterior(&self.state.zeta, &self.config);
        self.state.kappa_phi = Gamma::new(shape, 1.0 / rate)
            .expect("positive posterior parameters")
            .sample(&mut self.rng)
            .max(f64::MIN_POSITIVE);
    }

    pub fn log_joint(&self) -> f64 {
        model::log_prior(&self.state, &self.config)
            + model::log_likelihood(&self.state, self.snippets)
    }
}

/// Shape and rate of the conditional of `kappa_phi` given `zeta`.
pub fn precision_posterior(zeta: &Array3<f64>, config: &ModelConfig) -> (f64, f64) {
    let (t_n, g_n, k_n) = zeta.dim();
    let mut squares = 0.0;
    for t in 1..t_n {
        for g in 0..g_n {
            for k in 0..k_n {
                let d = zeta[[t, g, k]] - zeta[[t - 1, g, k]];
                squares += d * d;
            }
        }
    }
    let shape = config.a + (g_n * k_n * (t_n - 1)) as f64 / 2.0;
    (shape, config.b + squares / 2.0)
}

/// Retained draws of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStore {
    pub model: ModelConfig,
    pub sampler: SamplerConfig,
    /// One flattened `[T, G, K]` sense-probability array per retained sample.
    pub phi: Vec<Vec<f64>>,
    pub kappa_phi: Vec<f64>,
    pub log_joint: Vec<f64>,
    /// Sense assignments per retained sample, when recorded.
    pub assignments: Vec<Vec<u32>>,
    pub final_state: ModelState,
}

pub const CHECKPOINT_FORMAT: &str = "semchange-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointDocument {
    pub format: String,
    pub version: u32,
    pub model: ModelConfig,
    pub sampler: SamplerConfig,
    pub state: StateDocument,
    pub samples: SamplesDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplesDocument {
    /// Row-major `[T][G][K]` per sample.
    pub phi: Vec<Vec<f64>>,
    pub kappa_phi: Vec<f64>,
    pub log_joint: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assignments: Vec<Vec<u32>>,
}

impl SampleStore {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn dims(&self) -> StateDims {
        StateDims {
            time_bins: self.model.time_bins,
            genres: self.model.genres,
            senses: self.model.senses,
            vocab_size: self.model.vocab_size,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = CheckpointDocument {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            model: self.model.clone(),
            sampler: self.sampler.clone(),
            state: self.final_state.to_document(),
            samples: SamplesDocument {
                phi: self.phi.clone(),
                kappa_phi: self.kappa_phi.clone(),
                log_joint: self.log_joint.clone(),
                assignments: self.assignments.clone(),
            },
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CheckpointDocument = serde_json::from_str(text)?;
        if doc.format != CHECKPOINT_FORMAT || doc.version != CHECKPOINT_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported checkpoint {} v{}",
                doc.format, doc.version
            )));
        }
        let final_state = ModelState::from_document(doc.state)?;
        let cells = doc.model.time_bins * doc.model.genres * doc.model.senses;
        if doc.samples.phi.iter().any(|p| p.len() != cells) {
            return Err(Error::Dimension("sample size does not match model dims".into()));
        }
        Ok(SampleStore {
            model: doc.model,
            sampler: doc.sampler,
            phi: doc.samples.phi,
            kappa_phi: doc.samples.kappa_phi,
            log_joint: doc.samples.log_joint,
            assignments: doc.samples.assignments,
            final_state,
        })
    }
}

/// Run one chain: `iterations` sweeps, drop `burn_in`, keep every
/// `thinning`-th sweep after that.
pub fn run_chain(
    snippets: &[Snippet],
    model_config: &ModelConfig,
    sampler_config: &SamplerConfig,
) -> Result<(SampleStore, PosteriorTrajectory)> {
    if snippets.is_empty() {
        return Err(Error::Empty("no snippets to sample".into()));
    }
    sampler_config.validate()?;
    let mut sampler = Sampler::new(snippets, model_config, sampler_config.seed)?;
    sampler.set_workers(sampler_config.workers);

    let retained = sampler_config.retained();
    let mut phi_samples = Vec::with_capacity(retained);
    let mut kappa = Vec::with_capacity(retained);
    let mut log_joint = Vec::with_capacity(retained);
    let mut assignments = Vec::new();

    for it in 0..sampler_config.iterations {
        sampler.sweep()?;
        if it >= sampler_config.burn_in && (it - sampler_config.burn_in) % sampler_config.thinning == 0 {
            phi_samples.push(sampler.state.phi().iter().copied().collect());
            kappa.push(sampler.state.kappa_phi);
            log_joint.push(sampler.log_joint());
            if sampler_config.record_assignments {
                assignments.push(sampler.state.z.iter().map(|&k| k as u32).collect());
            }
        }
    }

    let store = SampleStore {
        model: model_config.clone(),
        sampler: sampler_config.clone(),
        phi: phi_samples,
        kappa_phi: kappa,
        log_joint,
        assignments,
        final_state: sampler.into_state(),
    };
    let trajectory = summarize(&store)?;
    Ok((store, trajectory))
}

/// Posterior mean and standard deviation of every sense probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTrajectory {
    /// `[T, G, K]`.
    pub mean: Array3<f64>,
    /// `[T, G, K]`, sample standard deviation across retained draws.
    pub std: Array3<f64>,
    pub n_samples: usize,
    pub genre_labels: Vec<String>,
}

impl PosteriorTrajectory {
    pub fn time_bins(&self) -> usize {
        self.mean.dim().0
    }

    pub fn genres(&self) -> usize {
        self.mean.dim().1
    }

    pub fn senses(&self) -> usize {
        self.mean.dim().2
    }

    pub fn with_genre_labels(mut self, labels: &[String]) -> Result<Self> {
        if labels.len() != self.genres() {
            return Err(Error::Dimension(format!(
                "{} genre labels for {} genres",
                labels.len(),
                self.genres()
            )));
        }
        self.genre_labels = labels.to_vec();
        Ok(self)
    }

    /// CSV with columns `time_bin,genre,sense,mean,std`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
        w.write_record(["time_bin", "genre", "sense", "mean", "std"])
            .map_err(csv_err)?;
        for ((t, g, k), m) in self.mean.indexed_iter() {
            w.write_record([
                t.to_string(),
                self.genre_labels[g].clone(),
                k.to_string(),
                m.to_string(),
                self.std[[t, g, k]].to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Invalid(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Parse the CSV written by [`PosteriorTrajectory::to_csv`]. Genres are
    /// indexed in order of first appearance and the grid must be complete.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(1, format!("csv header: {e}")))?
            .clone();
        let expected = ["time_bin", "genre", "sense", "mean", "std"];
        if headers.iter().map(str::trim).ne(expected) {
            return Err(Error::parse(1, format!("expected header {}", expected.join(","))));
        }
        let mut rows = Vec::new();
        let mut labels: Vec<String> = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::parse(line, e.to_string()))?;
            let field = |n: usize| record.get(n).map(str::trim).unwrap_or("");
            let t: usize = field(0)
                .parse()
                .map_err(|_| Error::parse(line, "invalid time_bin"))?;
            let genre = field(1).to_string();
            let g = match labels.iter().position(|l| *l == genre) {
                Some(g) => g,
                None => {
                    labels.push(genre);
                    labels.len() - 1
                }
            };
            let k: usize = field(2)
                .parse()
                .map_err(|_| Error::parse(line, "invalid sense"))?;
            let mean: f64 = field(3)
                .parse()
                .map_err(|_| Error::parse(line, "invalid mean"))?;
            let std: f64 = field(4)
                .parse()
                .map_err(|_| Error::parse(line, "invalid std"))?;
            if !(mean.is_finite() && std.is_finite() && std >= 0.0) {
                return Err(Error::parse(line, "mean/std must be finite, std >= 0"));
            }
            rows.push((t, g, k, mean, std));
        }
        if rows.is_empty() {
            return Err(Error::Empty("trajectory has no rows".into()));
        }
        let t_n = rows.iter().map(|r| r.0).max().unwrap_or(0) + 1;
        let k_n = rows.iter().map(|r| r.2).max().unwrap_or(0) + 1;
        let g_n = labels.len();
        if rows.len() != t_n * g_n * k_n {
            return Err(Error::Dimension(format!(
                "{} rows do not form a complete {t_n}x{g_n}x{k_n} grid",
                rows.len()
            )));
        }
        let mut mean = Array3::from_elem((t_n, g_n, k_n), f64::NAN);
        let mut std = Array3::zeros((t_n, g_n, k_n));
        for (t, g, k, m, s) in rows {
            if !mean[[t, g, k]].is_nan() {
                return Err(Error::Invalid(format!("duplicate row for ({t}, {g}, {k})")));
            }
            mean[[t, g, k]] = m;
            std[[t, g, k]] = s;
        }
        if mean.iter().any(|m| m.is_nan()) {
            return Err(Error::Dimension("incomplete trajectory grid".into()));
        }
        Ok(PosteriorTrajectory {
            mean,
            std,
            n_samples: 0,
            genre_labels: labels,
        })
    }
}

/// Per-cell mean and sample standard deviation over the retained samples.
pub fn summarize(store: &SampleStore) -> Result<PosteriorTrajectory> {
    let n = store.len();
    if n < 2 {
        return Err(Error::Invalid(format!(
            "need at least 2 retained samples to summarize, have {n}"
        )));
    }
    let dims = (store.model.time_bins, store.model.genres, store.model.senses);
    let cells = dims.0 * dims.1 * dims.2;
    let mut mean = vec![0.0; cells];
    for sample in &store.phi {
        for (m, &p) in mean.iter_mut().zip(sample) {
            *m += p;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; cells];
    for sample in &store.phi {
        for ((v, &p), &m) in var.iter_mut().zip(sample).zip(&mean) {
            *v += (p - m) * (p - m);
        }
    }
    let std: Vec<f64> = var.iter().map(|v| (v / (n - 1) as f64).sqrt()).collect();
    Ok(PosteriorTrajectory {
        mean: Array3::from_shape_vec(dims, mean).expect("cell count"),
        std: Array3::from_shape_vec(dims, std).expect("cell count"),
        n_samples: n,
        genre_labels: (0..dims.1).map(|g| g.to_string()).collect(),
    })
}
