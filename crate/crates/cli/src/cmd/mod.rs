//! Subcommands and the plumbing they share.

pub mod baseline;
pub mod detect;
pub mod evaluate;
pub mod replay;
pub mod simulate;
pub mod train;

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use log::info;
use semchange_core::corpus::{bin_time, ingest, Corpus, CorpusFormat, Document, GenreMap, TimeBinning};

use crate::manifest::{digest_inputs, unix_now, RunManifest, MANIFEST_FILE, MANIFEST_FORMAT};
use crate::output::StagedDir;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_PARTIAL: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Outputs were written but some inputs failed.
    Partial,
}

/// A user-facing input problem raised by the CLI itself.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<semchange_core::Error>() {
            return if e.is_numeric() { EXIT_NUMERIC } else { EXIT_INPUT };
        }
    }
    EXIT_INPUT
}

/// How the current process was started.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub argv: Vec<String>,
    pub cwd: PathBuf,
    pub started: u64,
}

impl Invocation {
    pub fn current(argv: &[String]) -> Result<Self> {
        Ok(Invocation {
            argv: argv.to_vec(),
            cwd: std::env::current_dir().context("cannot determine the working directory")?,
            started: unix_now(),
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory; created atomically and must not exist yet.
    #[arg(long, short, env = "SEMCHANGE_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Replace an existing output directory.
    #[arg(long)]
    pub force: bool,
}

impl OutputArgs {
    pub fn stage(&self) -> Result<StagedDir> {
        let out = self.out.as_ref().ok_or_else(|| {
            InputError("no output directory: pass --out or set SEMCHANGE_OUT_DIR".into())
        })?;
        StagedDir::create(out, self.force)
    }
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Corpus file (JSON lines or TSV).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Corpus format; guessed from the extension when omitted.
    #[arg(long)]
    pub format: Option<CorpusFormat>,
    /// Bin edges as comma-separated time values; bin i covers
    /// [edge i, edge i+1), the last bin also includes its right edge.
    /// Default: one bin per distinct time value.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub bins: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Args)]
pub struct TargetArgs {
    /// Target lemma (repeatable).
    #[arg(long = "target")]
    pub targets: Vec<String>,
    /// File with one target lemma per line.
    #[arg(long = "targets")]
    pub targets_file: Option<PathBuf>,
}

impl CorpusArgs {
    pub fn format(&self) -> CorpusFormat {
        self.format.unwrap_or_else(|| CorpusFormat::from_path(&self.corpus))
    }

    /// Read, bin and index the corpus. `collapse_genres` maps every document
    /// to a single genre.
    pub fn load(&self, collapse_genres: bool) -> Result<Corpus> {
        let ingested = ingest(&self.corpus, self.format())?;
        if !ingested.skipped.is_empty() {
            log::warn!("{}: {}", self.corpus.display(), ingested.skipped);
        }
        let documents: Vec<Document> = ingested.documents;
        if documents.is_empty() {
            return Err(semchange_core::Error::Empty(format!(
                "{} has no usable documents",
                self.corpus.display()
            ))
            .into());
        }
        let binning = match &self.bins {
            Some(edges) => bin_time(&documents, edges)?.0,
            None => TimeBinning::per_value(&documents)?,
        };
        let genres = if collapse_genres {
            GenreMap::collapsed()
        } else {
            GenreMap::from_documents(&documents)
        };
        let corpus = Corpus::new(documents, binning, genres)?;
        info!(
            "{}: {} documents, {} time bins, {} genres",
            self.corpus.display(),
            corpus.documents.len(),
            corpus.time_bins(),
            corpus.genres.len()
        );
        Ok(corpus)
    }
}

impl TargetArgs {
    /// Sorted, de-duplicated targets from the flags and the targets file.
    pub fn load(&self) -> Result<Vec<String>> {
        let mut set: BTreeSet<String> = self.targets.iter().map(|t| t.trim().to_string()).collect();
        if let Some(path) = &self.targets_file {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read targets file {}", path.display()))?;
            set.extend(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(String::from),
            );
        }
        set.remove("");
        if set.is_empty() {
            anyhow::bail!(InputError("no target lemmas given (use --target or --targets)".into()));
        }
        Ok(set.into_iter().collect())
    }

    pub fn input_files(&self) -> Vec<PathBuf> {
        self.targets_file.iter().cloned().collect()
    }
}

/// Everything except the outputs that goes into a manifest.
pub struct ManifestParts<'a> {
    pub command: &'a str,
    pub inputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub workers: usize,
    pub config: serde_json::Value,
}

/// Write the manifest into the staging directory and publish it.
pub fn finish(staged: StagedDir, inv: &Invocation, parts: ManifestParts<'_>) -> Result<PathBuf> {
    let manifest = RunManifest {
        format: MANIFEST_FORMAT.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: parts.command.into(),
        argv: inv.argv.clone(),
        cwd: inv.cwd.clone(),
        inputs: digest_inputs(&parts.inputs)?,
        seed: parts.seed,
        workers: parts.workers,
        config: parts.config,
        started_unix: inv.started,
        finished_unix: unix_now(),
    };
    staged.write(MANIFEST_FILE, manifest.to_json())?;
    let out = staged.commit()?;
    info!("wrote {}", out.display());
    Ok(out)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}
