//! Embedding-based change detection baselines.
//!
//! Spaces are trained with skip-gram negative sampling. Per-bin target
//! vectors come either from temporal referencing (one joint model in which
//! only the target tokens are bin-tagged) or from independent per-bin models
//! aligned with orthogonal Procrustes. The cosine similarity of a target's two
//! vectors is turned into a binary decision by thresholding at a quantile of a
//! Gamma distribution fitted to all targets' similarities.

mod gamma;
mod procrustes;
mod score;
mod sgns;
mod temporal;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

pub use gamma::{
    fit_gamma, gamma_threshold_decisions, GammaFit, GammaFitMethod, ThresholdConfig,
    ThresholdDecisions,
};
pub use procrustes::{orthogonal_procrustes, procrustes_align, Alignment};
pub use score::{score_targets, BaselineMode, GenreFilter, ScoreConfig, ScoreOutcome};
pub use sgns::{train_sgns, SgnsConfig};
pub use temporal::{tagged_lemma, temporal_reference};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub negatives: usize,
    pub window: usize,
    pub seed: u64,
}

/// Vocabulary-indexed dense vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    vocab: Vocabulary,
    vectors: Array2<f64>,
    pub meta: TrainingMeta,
}

const MAGIC: &[u8; 4] = b"SEMB";
const FORMAT_VERSION: u32 = 1;

impl EmbeddingSpace {
    pub fn new(vocab: Vocabulary, vectors: Array2<f64>, meta: TrainingMeta) -> Result<Self> {
        if vectors.nrows() != vocab.len() {
            return Err(Error::Dimension(format!(
                "{} vectors for {} lemmas",
                vectors.nrows(),
                vocab.len()
            )));
        }
        if vectors.ncols() == 0 {
            return Err(Error::Dimension("embedding dimension must be positive".into()));
        }
        if vectors.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("embedding contains NaN or infinite entries".into()));
        }
        Ok(EmbeddingSpace {
            vocab,
            vectors,
            meta,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vector(&self, lemma: &str) -> Option<ArrayView1<'_, f64>> {
        self.vocab
            .index_of(lemma)
            .map(|i| self.vectors.row(i as usize))
    }

    /// Binary form: `SEMB`, version, V and dim as little-endian `u32`, then
    /// each lemma as a `u32` byte length plus UTF-8 bytes, then the `V x dim`
    /// matrix as little-endian `f32`, row-major in vocabulary order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.len() as u32).to_le_bytes())?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        for lemma in self.vocab.lemmas() {
            w.write_all(&(lemma.len() as u32).to_le_bytes())?;
            w.write_all(lemma.as_bytes())?;
        }
        for &x in self.vectors.iter() {
            w.write_all(&(x as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        fn bad(what: &str) -> Error {
            Error::Invalid(format!("embedding file: {what}"))
        }
        fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
            let mut buf = [0u8; 4];
            r.read_exact(&mut buf).map_err(|_| bad(what))?;
            Ok(u32::from_le_bytes(buf))
        }
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = read_u32(&mut r, "truncated header")?;
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let v = read_u32(&mut r, "truncated header")? as usize;
        let dim = read_u32(&mut r, "truncated header")? as usize;
        let mut lemmas = Vec::with_capacity(v.min(1 << 20));
        for _ in 0..v {
            let len = read_u32(&mut r, "truncated lemma table")? as usize;
            let mut bytes = vec![0u8; len];
            r.read_exact(&mut bytes).map_err(|_| bad("truncated lemma table"))?;
            lemmas.push(String::from_utf8(bytes).map_err(|_| bad("lemma is not UTF-8"))?);
        }
        let vocab = Vocabulary::try_from(lemmas.clone())?;
        let mut vectors = Array2::zeros((v, dim));
        for lemma in &lemmas {
            let row = vocab.index_of(lemma).expect("lemma in vocabulary") as usize;
            for j in 0..dim {
                let bits = read_u32(&mut r, "truncated matrix")?;
                vectors[[row, j]] = f32::from_bits(bits) as f64;
            }
        }
        EmbeddingSpace::new(vocab, vectors, TrainingMeta::default())
    }

    /// word2vec text format: `V dim` header, then `lemma x1 x2 ...` per line.
    pub fn to_word2vec_text(&self) -> String {
        let mut out = format!("{} {}\n", self.len(), self.dim());
        for (lemma, row) in self.vocab.lemmas().iter().zip(self.vectors.rows()) {
            out.push_str(lemma);
            for x in row {
                out.push(' ');
                out.push_str(&(*x as f32).to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Cosine of the angle between two non-zero vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: ArrayView1<f64>, v: ArrayView1<f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension(format!(
            "vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Invalid("cosine similarity of a zero vector".into()));
    }
    Ok((u.dot(&v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Per-lemma cosine similarity between two time bins.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySeries(pub BTreeMap<String, f64>);

impl SimilaritySeries {
    pub fn insert(&mut self, lemma: impl Into<String>, similarity: f64) -> Result<()> {
        if !(-1.0..=1.0).contains(&similarity) {
            return Err(Error::Invalid(format!(
                "similarity {similarity} outside [-1, 1]"
            )));
        }
        self.0.insert(lemma.into(), similarity);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, lemma: &str) -> Option<f64> {
        self.0.get(lemma).copied()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("lemma\tsimilarity\n");
        for (lemma, s) in &self.0 {
            out.push_str(&format!("{lemma}\t{s}\n"));
        }
        out
    }
}

impl FromIterator<(String, f64)> for SimilaritySeries {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        SimilaritySeries(iter.into_iter().collect())
    }
}
