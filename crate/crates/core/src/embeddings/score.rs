use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    cosine_similarity, procrustes_align, tagged_lemma, temporal_reference, train_sgns,
    SgnsConfig, SimilaritySeries,
};
use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMode {
    /// One joint model with bin-tagged targets.
    TemporalReferencing,
    /// Independent per-bin models aligned with orthogonal Procrustes.
    AlignedSgns,
}

impl BaselineMode {
    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "tr" => Some(BaselineMode::TemporalReferencing),
            "op" => Some(BaselineMode::AlignedSgns),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BaselineMode::TemporalReferencing => "tr",
            BaselineMode::AlignedSgns => "op",
        }
    }
}

/// Document selection by genre label, compared case-insensitively.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenreFilter {
    #[default]
    All,
    Include(BTreeSet<String>),
    Exclude(BTreeSet<String>),
}

impl GenreFilter {
    pub const PRESETS: [&'static str; 7] = [
        "naive",
        "christian",
        "not-christian",
        "technical",
        "not-technical",
        "narrative",
        "not-narrative",
    ];

    pub fn include<I: IntoIterator<Item = S>, S: AsRef<str>>(labels: I) -> Self {
        GenreFilter::Include(labels.into_iter().map(|s| s.as_ref().to_lowercase()).collect())
    }

    pub fn exclude<I: IntoIterator<Item = S>, S: AsRef<str>>(labels: I) -> Self {
        GenreFilter::Exclude(labels.into_iter().map(|s| s.as_ref().to_lowercase()).collect())
    }

    /// `naive` keeps everything; `x` keeps genre `x`; `not-x` drops it.
    pub fn preset(name: &str) -> Option<Self> {
        let name = name.to_lowercase();
        if !Self::PRESETS.contains(&name.as_str()) {
            return None;
        }
        Some(match name.strip_prefix("not-") {
            _ if name == "naive" => GenreFilter::All,
            Some(genre) => GenreFilter::exclude([genre]),
            None => GenreFilter::include([name]),
        })
    }

    pub fn keeps(&self, genre: &str) -> bool {
        match self {
            GenreFilter::All => true,
            GenreFilter::Include(set) => set.contains(&genre.to_lowercase()),
            GenreFilter::Exclude(set) => !set.contains(&genre.to_lowercase()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub mode: BaselineMode,
    pub sgns: SgnsConfig,
    /// Bins to compare; defaults to the first and last.
    pub bins: Option<(usize, usize)>,
    pub filter: GenreFilter,
}

impl ScoreConfig {
    pub fn new(mode: BaselineMode) -> Self {
        ScoreConfig {
            mode,
            sgns: SgnsConfig::default(),
            bins: None,
            filter: GenreFilter::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOutcome {
    pub series: SimilaritySeries,
    /// Targets absent from a required vocabulary, excluded from the series.
    pub missing: Vec<String>,
    pub documents_used: usize,
    pub bins: (usize, usize),
}

/// Cosine similarity of each target's representations in two time bins.
pub fn score_targets(
    corpus: &Corpus,
    targets: &[String],
    config: &ScoreConfig,
) -> Result<ScoreOutcome> {
    if targets.is_empty() {
        return Err(Error::Empty("no target lemmas".into()));
    }
    let t = corpus.time_bins();
    let (t1, t2) = config.bins.unwrap_or((0, t.saturating_sub(1)));
    if t1 == t2 || t1 >= t || t2 >= t {
        return Err(Error::Config(format!(
            "need two distinct bins below {t}, got ({t1}, {t2})"
        )));
    }
    let keep: Vec<usize> = (0..corpus.documents.len())
        .filter(|&i| config.filter.keeps(&corpus.documents[i].genre))
        .collect();
    if keep.is_empty() {
        return Err(Error::Empty("genre filter excludes every document".into()));
    }
    let filtered = Corpus {
        documents: keep.iter().map(|&i| corpus.documents[i].clone()).collect(),
        bins: keep.iter().map(|&i| corpus.bins[i]).collect(),
        binning: corpus.binning.clone(),
        genres: corpus.genres.clone(),
    };

    let mut series = SimilaritySeries::default();
    let mut missing = Vec::new();
    match config.mode {
        BaselineMode::TemporalReferencing => {
            let docs = temporal_reference(&filtered, targets)?;
            let space = train_sgns(&docs, &config.sgns)?;
            for target in targets {
                let a = space.vector(&tagged_lemma(target, t1));
                let b = space.vector(&tagged_lemma(target, t2));
                match (a, b) {
                    (Some(a), Some(b)) => series.insert(target.clone(), cosine_similarity(a, b)?)?,
                    _ => missing.push(target.clone()),
                }
            }
        }
        BaselineMode::AlignedSgns => {
            let in_bin = |bin: usize| -> Vec<Document> {
                filtered
                    .documents
                    .iter()
                    .zip(&filtered.bins)
                    .filter(|&(_, &b)| b == bin)
                    .map(|(d, _)| d.clone())
                    .collect()
            };
            let first = train_sgns(&in_bin(t1), &config.sgns)?;
            let second = train_sgns(&in_bin(t2), &config.sgns)?;
            let aligned = procrustes_align(&first, &second)?.aligned;
            for target in targets {
                match (aligned.vector(target), second.vector(target)) {
                    (Some(a), Some(b)) => series.insert(target.clone(), cosine_similarity(a, b)?)?,
                    _ => missing.push(target.clone()),
                }
            }
        }
    }
    Ok(ScoreOutcome {
        series,
        missing,
        documents_used: keep.len(),
        bins: (t1, t2),
    })
}
