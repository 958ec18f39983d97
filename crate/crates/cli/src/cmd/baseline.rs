use anyhow::Result;
use clap::{Args, ValueEnum};
use log::{info, warn};
use semchange_core::embeddings::{
    gamma_threshold_decisions, score_targets, BaselineMode, GammaFitMethod, GenreFilter,
    ScoreConfig, SgnsConfig, ThresholdConfig,
};
use serde_json::json;

use super::{finish, CorpusArgs, InputError, Invocation, ManifestParts, OutputArgs, Status, TargetArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Temporal referencing: one model, targets tagged with their bin.
    Tr,
    /// Orthogonal Procrustes: one model per bin, aligned.
    Op,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fit {
    Moments,
    Mle,
}

#[derive(Debug, Clone, Args)]
pub struct SgnsArgs {
    #[arg(long, default_value_t = 100)]
    pub dim: usize,
    /// Maximum distance between a word and its contexts.
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 2)]
    pub min_count: usize,
    #[arg(long, default_value_t = 0.025)]
    pub learning_rate: f32,
    /// Frequent-word subsampling threshold (off by default).
    #[arg(long)]
    pub subsample: Option<f64>,
}

#[derive(Debug, Clone, Args)]
#[group(id = "genre-filter", multiple = false)]
pub struct FilterArgs {
    /// Named filter: naive, christian, not-christian, technical,
    /// not-technical, narrative, not-narrative.
    #[arg(long, group = "genre-filter")]
    pub genre_preset: Option<String>,
    /// Keep only these genres (comma-separated, case-insensitive).
    #[arg(long, value_delimiter = ',', group = "genre-filter")]
    pub genre_include: Option<Vec<String>>,
    /// Drop these genres (comma-separated, case-insensitive).
    #[arg(long, value_delimiter = ',', group = "genre-filter")]
    pub genre_exclude: Option<Vec<String>>,
}

impl FilterArgs {
    pub fn filter(&self) -> Result<GenreFilter> {
        if let Some(name) = &self.genre_preset {
            return GenreFilter::preset(name).ok_or_else(|| {
                InputError(format!(
                    "unknown genre preset `{name}`; known: {}",
                    GenreFilter::PRESETS.join(", ")
                ))
                .into()
            });
        }
        Ok(match (&self.genre_include, &self.genre_exclude) {
            (Some(inc), _) => GenreFilter::include(inc),
            (_, Some(exc)) => GenreFilter::exclude(exc),
            _ => GenreFilter::All,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub targets: TargetArgs,
    #[arg(long, value_enum, default_value_t = Mode::Tr)]
    pub mode: Mode,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[command(flatten)]
    pub sgns: SgnsArgs,
    /// The two time bins to compare, e.g. `0,1`; first and last by default.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub compare: Option<Vec<usize>>,
    /// Quantile of the fitted Gamma distribution used as the threshold.
    #[arg(long, default_value_t = 0.75)]
    pub quantile: f64,
    /// Added to similarities before fitting.
    #[arg(long, default_value_t = 1.0)]
    pub shift: f64,
    #[arg(long, value_enum, default_value_t = Fit::Moments)]
    pub fit: Fit,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Training threads. More than one trains lock-free in parallel and is
    /// NOT reproducible; use 1 for byte-identical reruns.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn run(args: BaselineArgs, inv: &Invocation) -> Result<Status> {
    anyhow::ensure!(args.workers > 0, InputError("--workers must be positive".into()));
    let targets = args.targets.load()?;
    let filter = args.filter.filter()?;
    let corpus = args.corpus.load(false)?;

    let mode = match args.mode {
        Mode::Tr => BaselineMode::TemporalReferencing,
        Mode::Op => BaselineMode::AlignedSgns,
    };
    let sgns = SgnsConfig {
        dim: args.sgns.dim,
        window: args.sgns.window,
        negatives: args.sgns.negatives,
        epochs: args.sgns.epochs,
        min_count: args.sgns.min_count,
        seed: args.seed,
        workers: args.workers,
        learning_rate: args.sgns.learning_rate,
        subsample: args.sgns.subsample,
    };
    let score_config = ScoreConfig {
        mode,
        sgns,
        bins: args.compare.as_ref().map(|b| (b[0], b[1])),
        filter,
    };
    let threshold_config = ThresholdConfig {
        quantile: args.quantile,
        shift: args.shift,
        method: match args.fit {
            Fit::Moments => GammaFitMethod::Moments,
            Fit::Mle => GammaFitMethod::MaximumLikelihood,
        },
    };

    let outcome = score_targets(&corpus, &targets, &score_config)?;
    info!(
        "{}: {} documents used, bins {} and {}",
        mode.name(),
        outcome.documents_used,
        outcome.bins.0,
        outcome.bins.1
    );
    if !outcome.missing.is_empty() {
        warn!("not in the vocabulary: {}", outcome.missing.join(", "));
    }
    let thresholded = gamma_threshold_decisions(&outcome.series, &threshold_config)?;
    if thresholded.degenerate {
        warn!("similarities are constant; no target is flagged");
    }

    let staged = args.output.stage()?;
    staged.write("similarities.tsv", outcome.series.to_tsv())?;
    let mut tsv = String::from("lemma\tchanged\tsimilarity\n");
    for (lemma, changed) in &thresholded.decisions {
        let sim = outcome.series.get(lemma).expect("decided lemmas are scored");
        tsv.push_str(&format!("{lemma}\t{}\t{sim}\n", u8::from(*changed)));
    }
    staged.write("decisions.tsv", tsv)?;
    staged.write(
        "threshold.json",
        serde_json::to_string_pretty(&json!({
            "fit": thresholded.fit,
            "threshold": thresholded.threshold,
            "degenerate": thresholded.degenerate,
        }))? + "\n",
    )?;
    if !outcome.missing.is_empty() {
        staged.write("missing.txt", outcome.missing.join("\n") + "\n")?;
    }

    let mut inputs = vec![args.corpus.corpus.clone()];
    inputs.extend(args.targets.input_files());
    finish(
        staged,
        inv,
        ManifestParts {
            command: "baseline",
            inputs,
            seed: Some(args.seed),
            workers: args.workers,
            config: json!({
                "mode": mode,
                "format": args.corpus.format(),
                "bin_edges": corpus.binning.edges(),
                "compared_bins": [outcome.bins.0, outcome.bins.1],
                "genre_filter": score_config.filter,
                "documents_used": outcome.documents_used,
                "targets": targets,
                "sgns": score_config.sgns,
                "threshold": threshold_config,
            }),
        },
    )?;
    Ok(Status::Success)
}
