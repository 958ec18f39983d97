//! Corpus ingestion, time binning, snippet extraction and vocabularies.
//!
//! Two line-oriented input formats are accepted:
//!
//! ```text
//! JSONL: {"doc_id": "d1", "time": -3, "genre": "Narrative", "lemmas": ["a", "b"]}
//! TSV:   d1 <TAB> -3 <TAB> Narrative <TAB> a b
//! ```
//!
//! Records without a genre or a time value, or without any lemmas, are skipped
//! and counted in a [`SkipReport`]. Anything else that does not parse is an
//! error carrying its 1-based line number.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    /// Signed time value, e.g. a century; negative values are BCE.
    pub time_value: i64,
    pub genre: String,
    pub lemmas: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl CorpusFormat {
    /// Guess the format from a file extension (`.tsv` / `.tab` are TSV,
    /// everything else is JSONL).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => CorpusFormat::Tsv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(CorpusFormat::Jsonl),
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(Error::Config(format!("unknown corpus format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SkipReason {
    MissingGenre,
    MissingTime,
    NoLemmas,
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SkipReason::MissingGenre => "missing genre",
            SkipReason::MissingTime => "missing time",
            SkipReason::NoLemmas => "no lemmas",
        })
    }
}

/// Counts of skipped records per failure reason.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SkipReport {
    counts: BTreeMap<SkipReason, usize>,
}

impl SkipReport {
    pub fn record(&mut self, reason: SkipReason) {
        *self.counts.entry(reason).or_default() += 1;
    }

    pub fn count(&self, reason: SkipReason) -> usize {
        self.counts.get(&reason).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

impl fmt::Display for SkipReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.counts.is_empty() {
            return f.write_str("skipped 0 records");
        }
        write!(f, "skipped {} records:", self.total())?;
        for (reason, n) in &self.counts {
            write!(f, " {reason}={n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub documents: Vec<Document>,
    pub skipped: SkipReport,
}

pub fn ingest(path: &Path, format: CorpusFormat) -> Result<Ingested> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, format)
}

pub fn parse_corpus(text: &str, format: CorpusFormat) -> Result<Ingested> {
    let mut documents = Vec::new();
    let mut skipped = SkipReport::default();
    let mut seen_ids: HashSet<String> = HashSet::new();
    let mut records = 0usize;

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        records += 1;
        let parsed = match format {
            CorpusFormat::Jsonl => parse_jsonl_record(line, line_no)?,
            CorpusFormat::Tsv => parse_tsv_record(line, line_no)?,
        };
        match parsed {
            Ok(doc) => {
                if !seen_ids.insert(doc.doc_id.clone()) {
                    return Err(Error::parse(
                        line_no,
                        format!("duplicate doc_id `{}`", doc.doc_id),
                    ));
                }
                documents.push(doc);
            }
            Err(reason) => skipped.record(reason),
        }
    }

    if records == 0 {
        return Err(Error::Empty("corpus file has no records".into()));
    }
    Ok(Ingested { documents, skipped })
}

type Record = std::result::Result<Document, SkipReason>;

fn parse_jsonl_record(line: &str, line_no: usize) -> Result<Record> {
    let value: Value = serde_json::from_str(line)
        .map_err(|e| Error::parse(line_no, format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::parse(line_no, "record is not a JSON object"))?;

    let doc_id = match obj.get("doc_id") {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err(Error::parse(line_no, "missing or invalid `doc_id`")),
    };

    let genre = match obj.get("genre") {
        None | Some(Value::Null) => return Ok(Err(SkipReason::MissingGenre)),
        Some(Value::String(s)) if s.trim().is_empty() => {
            return Ok(Err(SkipReason::MissingGenre))
        }
        Some(Value::String(s)) => s.trim().to_string(),
        Some(_) => return Err(Error::parse(line_no, "`genre` must be a string")),
    };

    let time_value = match obj.get("time") {
        None | Some(Value::Null) => return Ok(Err(SkipReason::MissingTime)),
        Some(Value::Number(n)) => n
            .as_i64()
            .ok_or_else(|| Error::parse(line_no, format!("`time` is not an integer: {n}")))?,
        Some(Value::String(s)) if s.trim().is_empty() => return Ok(Err(SkipReason::MissingTime)),
        Some(Value::String(s)) => parse_time(s, line_no)?,
        Some(_) => return Err(Error::parse(line_no, "`time` must be an integer")),
    };

    let lemmas = match obj.get("lemmas") {
        None | Some(Value::Null) => return Ok(Err(SkipReason::NoLemmas)),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| Error::parse(line_no, "`lemmas` must contain only strings"))
            })
            .collect::<Result<Vec<_>>>()?,
        Some(_) => return Err(Error::parse(line_no, "`lemmas` must be an array")),
    };
    let lemmas: Vec<String> = lemmas.into_iter().filter(|l| !l.is_empty()).collect();
    if lemmas.is_empty() {
        return Ok(Err(SkipReason::NoLemmas));
    }

    Ok(Ok(Document {
        doc_id,
        time_value,
        genre,
        lemmas,
    }))
}

fn parse_tsv_record(line: &str, line_no: usize) -> Result<Record> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(Error::parse(
            line_no,
            format!("expected 4 tab-separated fields, found {}", fields.len()),
        ));
    }
    let doc_id = fields[0].trim();
    if doc_id.is_empty() {
        return Err(Error::parse(line_no, "empty doc_id"));
    }
    let time = fields[1].trim();
    if time.is_empty() {
        return Ok(Err(SkipReason::MissingTime));
    }
    let time_value = parse_time(time, line_no)?;
    let genre = fields[2].trim();
    if genre.is_empty() {
        return Ok(Err(SkipReason::MissingGenre));
    }
    let lemmas: Vec<String> = fields[3].split_whitespace().map(str::to_string).collect();
    if lemmas.is_empty() {
        return Ok(Err(SkipReason::NoLemmas));
    }
    Ok(Ok(Document {
        doc_id: doc_id.to_string(),
        time_value,
        genre: genre.to_string(),
        lemmas,
    }))
}

fn parse_time(s: &str, line_no: usize) -> Result<i64> {
    s.trim()
        .parse::<i64>()
        .map_err(|_| Error::parse(line_no, format!("time value `{s}` is not an integer")))
}

/// Serialize documents in one of the ingestible formats.
pub fn write_corpus(documents: &[Document], format: CorpusFormat) -> Result<String> {
    let mut out = String::new();
    for doc in documents {
        match format {
            CorpusFormat::Jsonl => {
                let line = serde_json::json!({
                    "doc_id": doc.doc_id,
                    "time": doc.time_value,
                    "genre": doc.genre,
                    "lemmas": doc.lemmas,
                });
                out.push_str(&serde_json::to_string(&line)?);
            }
            CorpusFormat::Tsv => {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}",
                    doc.doc_id,
                    doc.time_value,
                    doc.genre,
                    doc.lemmas.join(" ")
                ));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Half-open time intervals `[edges[i], edges[i+1])`; the last interval is
/// closed on the right.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeBinning {
    edges: Vec<i64>,
}

impl TimeBinning {
    pub fn new(edges: Vec<i64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::Config(
                "time binning needs at least two edges".into(),
            ));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "bin edges must be strictly increasing: {edges:?}"
            )));
        }
        Ok(TimeBinning { edges })
    }

    /// One bin per distinct observed time value.
    pub fn per_value(documents: &[Document]) -> Result<Self> {
        let mut values: Vec<i64> = documents.iter().map(|d| d.time_value).collect();
        values.sort_unstable();
        values.dedup();
        let last = *values
            .last()
            .ok_or_else(|| Error::Empty("no documents to bin".into()))?;
        values.push(last + 1);
        TimeBinning::new(values)
    }

    pub fn edges(&self) -> &[i64] {
        &self.edges
    }

    pub fn bin_count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn bin_of(&self, time_value: i64) -> Option<usize> {
        let n = self.edges.len();
        if time_value < self.edges[0] || time_value > self.edges[n - 1] {
            return None;
        }
        // partition_point gives the first edge strictly greater than the value.
        let idx = self.edges.partition_point(|&e| e <= time_value);
        Some((idx - 1).min(n - 2))
    }
}

/// Assign every document to a time bin.
pub fn bin_time(documents: &[Document], edges: &[i64]) -> Result<(TimeBinning, Vec<usize>)> {
    let binning = TimeBinning::new(edges.to_vec())?;
    let assignment = assign_bins(documents, &binning)?;
    Ok((binning, assignment))
}

pub fn assign_bins(documents: &[Document], binning: &TimeBinning) -> Result<Vec<usize>> {
    let mut offenders = Vec::new();
    let mut bins = Vec::with_capacity(documents.len());
    for doc in documents {
        match binning.bin_of(doc.time_value) {
            Some(b) => bins.push(b),
            None => offenders.push(format!("{} (time {})", doc.doc_id, doc.time_value)),
        }
    }
    if offenders.is_empty() {
        Ok(bins)
    } else {
        Err(Error::OutOfRange(offenders))
    }
}

/// Genre labels mapped to dense indices in sorted label order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenreMap {
    labels: Vec<String>,
    collapsed: bool,
}

/// Label used for the single genre when genres are collapsed.
pub const ALL_GENRES: &str = "all";

impl GenreMap {
    pub fn from_documents(documents: &[Document]) -> Self {
        let mut labels: Vec<String> = documents.iter().map(|d| d.genre.clone()).collect();
        labels.sort();
        labels.dedup();
        GenreMap {
            labels,
            collapsed: false,
        }
    }

    /// A single genre for every document (genre-unaware mode).
    pub fn collapsed() -> Self {
        GenreMap {
            labels: vec![ALL_GENRES.to_string()],
            collapsed: true,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, genre: &str) -> Option<usize> {
        if self.collapsed {
            return Some(0);
        }
        self.labels.binary_search_by(|l| l.as_str().cmp(genre)).ok()
    }
}

/// Documents together with their bin and genre indices.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub binning: TimeBinning,
    pub bins: Vec<usize>,
    pub genres: GenreMap,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, binning: TimeBinning, genres: GenreMap) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::Empty("corpus has no documents".into()));
        }
        let bins = assign_bins(&documents, &binning)?;
        for doc in &documents {
            if genres.index_of(&doc.genre).is_none() {
                return Err(Error::Invalid(format!(
                    "genre `{}` of document {} is not in the genre map",
                    doc.genre, doc.doc_id
                )));
            }
        }
        Ok(Corpus {
            documents,
            binning,
            bins,
            genres,
        })
    }

    pub fn time_bins(&self) -> usize {
        self.binning.bin_count()
    }
}

/// A target occurrence with its context still as lemma strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawSnippet {
    pub doc_id: String,
    pub time_bin: usize,
    pub genre: usize,
    pub context: Vec<String>,
}

/// A target occurrence with its context as a bag of vocabulary indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    pub id: usize,
    pub time_bin: usize,
    pub genre: usize,
    pub context: Vec<u32>,
    pub doc_id: String,
}

/// One snippet per occurrence of `target`, with up to `window` lemmas on each
/// side. Windows stop at document boundaries, and other occurrences of the
/// target inside a window are left out of the context.
pub fn extract_snippets(corpus: &Corpus, target: &str, window: usize) -> Result<Vec<RawSnippet>> {
    if window == 0 {
        return Err(Error::Config("window size must be at least 1".into()));
    }
    if target.is_empty() {
        return Err(Error::Config("target lemma must be non-empty".into()));
    }
    let mut out = Vec::new();
    for (doc, &bin) in corpus.documents.iter().zip(&corpus.bins) {
        let genre = corpus
            .genres
            .index_of(&doc.genre)
            .expect("corpus genres validated at construction");
        let lemmas = &doc.lemmas;
        for (pos, lemma) in lemmas.iter().enumerate() {
            if lemma != target {
                continue;
            }
            let lo = pos.saturating_sub(window);
            let hi = (pos + window + 1).min(lemmas.len());
            let context = lemmas[lo..hi]
                .iter()
                .filter(|l| l.as_str() != target)
                .cloned()
                .collect();
            out.push(RawSnippet {
                doc_id: doc.doc_id.clone(),
                time_bin: bin,
                genre,
                context,
            });
        }
    }
    Ok(out)
}

/// Bijective lemma/index map in lexicographic lemma order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    lemmas: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Build from lemmas in any order; duplicates are collapsed.
    pub fn from_lemmas<I, S>(lemmas: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut lemmas: Vec<String> = lemmas.into_iter().map(Into::into).collect();
        lemmas.sort();
        lemmas.dedup();
        let index = lemmas
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i as u32))
            .collect();
        Vocabulary { lemmas, index }
    }

    pub fn len(&self) -> usize {
        self.lemmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lemmas.is_empty()
    }

    pub fn index_of(&self, lemma: &str) -> Option<u32> {
        self.index.get(lemma).copied()
    }

    pub fn lemma(&self, index: u32) -> &str {
        &self.lemmas[index as usize]
    }

    pub fn lemmas(&self) -> &[String] {
        &self.lemmas
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(lemmas: Vec<String>) -> Result<Self> {
        let n = lemmas.len();
        let vocab = Vocabulary::from_lemmas(lemmas);
        if vocab.len() != n {
            return Err(Error::Invalid("vocabulary contains duplicate lemmas".into()));
        }
        Ok(vocab)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.lemmas
    }
}

/// Vocabulary over context lemmas occurring at least `min_count` times, with
/// the snippets re-indexed against it. Out-of-vocabulary context lemmas are
/// dropped.
pub fn build_vocabulary(
    snippets: &[RawSnippet],
    min_count: usize,
) -> Result<(Vocabulary, Vec<Snippet>)> {
    if min_count == 0 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in snippets {
        for lemma in &s.context {
            *counts.entry(lemma.as_str()).or_default() += 1;
        }
    }
    let vocab = Vocabulary::from_lemmas(
        counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .map(|(l, _)| l.to_string()),
    );
    if vocab.is_empty() {
        return Err(Error::Empty(format!(
            "no context lemma occurs at least {min_count} times"
        )));
    }
    let indexed = snippets
        .iter()
        .enumerate()
        .map(|(id, s)| Snippet {
            id,
            time_bin: s.time_bin,
            genre: s.genre,
            context: s.context.iter().filter_map(|l| vocab.index_of(l)).collect(),
            doc_id: s.doc_id.clone(),
        })
        .collect();
    Ok((vocab, indexed))
}
