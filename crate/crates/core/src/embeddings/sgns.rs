use std::collections::HashMap;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EmbeddingSpace, TrainingMeta};
use crate::corpus::{Document, Vocabulary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: usize,
    pub seed: u64,
    /// Training is bit-reproducible only with a single worker.
    pub workers: usize,
    pub learning_rate: f32,
    /// Frequent-word subsampling threshold; off when `None`.
    pub subsample: Option<f64>,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            min_count: 2,
            seed: 1,
            workers: 1,
            learning_rate: 0.025,
            subsample: None,
        }
    }
}

/// f32 cells shared between Hogwild workers.
struct SharedMatrix {
    cells: Vec<AtomicU32>,
    dim: usize,
}

impl SharedMatrix {
    fn from_values(values: Vec<f32>, dim: usize) -> Self {
        SharedMatrix {
            cells: values.into_iter().map(|x| AtomicU32::new(x.to_bits())).collect(),
            dim,
        }
    }

    fn load_row(&self, row: usize, out: &mut [f32]) {
        let base = row * self.dim;
        for (o, c) in out.iter_mut().zip(&self.cells[base..base + self.dim]) {
            *o = f32::from_bits(c.load(Ordering::Relaxed));
        }
    }

    fn add_row(&self, row: usize, delta: &[f32]) {
        let base = row * self.dim;
        for (c, d) in self.cells[base..base + self.dim].iter().zip(delta) {
            let v = f32::from_bits(c.load(Ordering::Relaxed)) + d;
            c.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_array(self, rows: usize) -> Array2<f64> {
        let values = self
            .cells
            .into_iter()
            .map(|c| f32::from_bits(c.into_inner()) as f64)
            .collect();
        Array2::from_shape_vec((rows, self.dim), values).expect("matrix shape")
    }
}

fn sigmoid(x: f32) -> f32 {
    if x > 20.0 {
        1.0
    } else if x < -20.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

pub(crate) fn initial_vectors(rows: usize, dim: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 / dim as f32;
    (0..rows * dim)
        .map(|_| rng.random_range(-half..half))
        .collect()
}

/// Train skip-gram with negative sampling on the documents' lemma sequences.
///
/// Each position predicts the lemmas within a randomly shrunk window of at
/// most `window` positions; negatives come from the unigram distribution
/// raised to 3/4; the learning rate decays linearly.
pub fn train_sgns(documents: &[Document], config: &SgnsConfig) -> Result<EmbeddingSpace> {
    if config.dim < 2 {
        return Err(Error::Config("embedding dimension must be at least 2".into()));
    }
    if config.window == 0 || config.min_count == 0 {
        return Err(Error::Config("window and min_count must be positive".into()));
    }
    if documents.is_empty() {
        return Err(Error::Empty("no documents to train on".into()));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for doc in documents {
        for lemma in &doc.lemmas {
            *counts.entry(lemma.as_str()).or_default() += 1;
        }
    }
    let vocab = Vocabulary::from_lemmas(
        counts
            .iter()
            .filter(|&(_, &c)| c >= config.min_count as u64)
            .map(|(l, _)| l.to_string()),
    );
    if vocab.is_empty() {
        return Err(Error::Empty(format!(
            "no lemma occurs at least {} times",
            config.min_count
        )));
    }
    let freq: Vec<u64> = vocab.lemmas().iter().map(|l| counts[l.as_str()]).collect();
    let total_words: u64 = freq.iter().sum();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eed);
    let sentences: Vec<Vec<u32>> = documents
        .iter()
        .map(|doc| {
            doc.lemmas
                .iter()
                .filter_map(|l| vocab.index_of(l))
                .filter(|&w| match config.subsample {
                    None => true,
                    Some(t) => {
                        let f = freq[w as usize] as f64 / total_words as f64;
                        let keep = ((f / t).sqrt() + 1.0) * t / f;
                        rng.random::<f64>() < keep
                    }
                })
                .collect()
        })
        .collect();

    let v = vocab.len();
    let dim = config.dim;
    let input = SharedMatrix::from_values(initial_vectors(v, dim, config.seed), dim);
    let output = SharedMatrix::from_values(vec![0.0; v * dim], dim);
    let noise = WeightedIndex::new(freq.iter().map(|&c| (c as f64).powf(0.75)))
        .map_err(|e| Error::Invalid(format!("noise distribution: {e}")))?;

    let corpus_words: u64 = sentences.iter().map(|s| s.len() as u64).sum();
    let schedule_total = (config.epochs as u64 * corpus_words).max(1);
    let processed = AtomicU64::new(0);
    let workers = config.workers.max(1).min(sentences.len().max(1));
    let shard_len = sentences.len().div_ceil(workers);

    let ctx = TrainContext {
        input: &input,
        output: &output,
        noise: &noise,
        processed: &processed,
        schedule_total,
        config,
    };
    if workers == 1 {
        ctx.run(&sentences, 0);
    } else {
        std::thread::scope(|scope| {
            for (worker, shard) in sentences.chunks(shard_len).enumerate() {
                let ctx = &ctx;
                scope.spawn(move || ctx.run(shard, worker as u64));
            }
        });
    }

    let meta = TrainingMeta {
        epochs: config.epochs,
        negatives: config.negatives,
        window: config.window,
        seed: config.seed,
    };
    EmbeddingSpace::new(vocab, input.into_array(v), meta)
}

struct TrainContext<'a> {
    input: &'a SharedMatrix,
    output: &'a SharedMatrix,
    noise: &'a WeightedIndex<f64>,
    processed: &'a AtomicU64,
    schedule_total: u64,
    config: &'a SgnsConfig,
}

impl TrainContext<'_> {
    fn run(&self, sentences: &[Vec<u32>], worker: u64) {
        let cfg = self.config;
        let dim = cfg.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(worker));
        let mut center = vec![0f32; dim];
        let mut other = vec![0f32; dim];
        let mut grad = vec![0f32; dim];
        let mut delta = vec![0f32; dim];
        let floor = cfg.learning_rate * 1e-4;

        for _ in 0..cfg.epochs {
            for sentence in sentences {
                let done = self.processed.fetch_add(sentence.len() as u64, Ordering::Relaxed);
                let progress = done as f32 / self.schedule_total as f32;
                let alpha = (cfg.learning_rate * (1.0 - progress)).max(floor);

                for (pos, &word) in sentence.iter().enumerate() {
                    let reach = cfg.window - rng.random_range(0..cfg.window);
                    let lo = pos.saturating_sub(reach);
                    let hi = (pos + reach + 1).min(sentence.len());
                    for (cpos, &context) in sentence.iter().enumerate().take(hi).skip(lo) {
                        if cpos == pos {
                            continue;
                        }
                        self.input.load_row(word as usize, &mut center);
                        grad.iter_mut().for_each(|g| *g = 0.0);
                        for n in 0..=cfg.negatives {
                            let (target, label) = if n == 0 {
                                (context, 1.0)
                            } else {
                                let t = self.noise.sample(&mut rng) as u32;
                                if t == context {
                                    continue;
                                }
                                (t, 0.0)
                            };
                            self.output.load_row(target as usize, &mut other);
                            let dot: f32 = center.iter().zip(&other).map(|(a, b)| a * b).sum();
                            let g = (label - sigmoid(dot)) * alpha;
                            for j in 0..dim {
                                grad[j] += g * other[j];
                                delta[j] = g * center[j];
                            }
                            self.output.add_row(target as usize, &delta);
                        }
                        self.input.add_row(word as usize, &grad);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::cosine_similarity;

    fn doc(id: usize, lemmas: &[&str]) -> Document {
        Document {
            doc_id: id.to_string(),
            time_value: 0,
            genre: "g".into(),
            lemmas: lemmas.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Each sentence repeats its block's pair, so both members share contexts.
    fn pair_corpus() -> Vec<Document> {
        let mut docs = Vec::new();
        for i in 0..1000 {
            docs.push(doc(2 * i, &["a", "b", "a", "b"]));
            docs.push(doc(2 * i + 1, &["c", "d", "c", "d"]));
        }
        docs
    }

    #[test]
    fn co_occurring_pair_is_closer_than_unrelated() {
        let docs = pair_corpus();
        for seed in 0..5 {
            let config = SgnsConfig {
                dim: 10,
                epochs: 3,
                seed,
                ..SgnsConfig::default()
            };
            let space = train_sgns(&docs, &config).unwrap();
            let a = space.vector("a").unwrap();
            let ab = cosine_similarity(a, space.vector("b").unwrap()).unwrap();
            let ac = cosine_similarity(a, space.vector("c").unwrap()).unwrap();
            assert!(ab > ac, "seed {seed}: cos(a,b)={ab} cos(a,c)={ac}");
        }
    }

    #[test]
    fn zero_epochs_leaves_initialization() {
        let config = SgnsConfig {
            dim: 8,
            epochs: 0,
            ..SgnsConfig::default()
        };
        let space = train_sgns(&pair_corpus(), &config).unwrap();
        let init = initial_vectors(4, 8, config.seed);
        for (a, b) in space.vectors().iter().zip(&init) {
            assert_eq!(*a, *b as f64);
        }
    }

    #[test]
    fn single_worker_is_deterministic() {
        let config = SgnsConfig {
            dim: 12,
            epochs: 2,
            seed: 9,
            ..SgnsConfig::default()
        };
        let docs = pair_corpus();
        assert_eq!(train_sgns(&docs, &config).unwrap(), train_sgns(&docs, &config).unwrap());
    }

    #[test]
    fn multi_worker_training_is_finite() {
        let config = SgnsConfig {
            dim: 12,
            epochs: 2,
            workers: 4,
            ..SgnsConfig::default()
        };
        let space = train_sgns(&pair_corpus(), &config).unwrap();
        assert!(space.vectors().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        let docs = vec![doc(0, &["a", "b"])];
        assert!(matches!(train_sgns(&docs, &SgnsConfig::default()), Err(Error::Empty(_))));
        let config = SgnsConfig {
            dim: 1,
            ..SgnsConfig::default()
        };
        assert!(train_sgns(&pair_corpus(), &config).is_err());
    }

    #[test]
    fn subsampling_runs() {
        let config = SgnsConfig {
            dim: 8,
            epochs: 1,
            subsample: Some(1e-3),
            ..SgnsConfig::default()
        };
        assert!(train_sgns(&pair_corpus(), &config).is_ok());
    }
}
