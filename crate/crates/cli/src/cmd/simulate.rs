use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use log::info;
use ndarray::Array3;
use semchange_core::corpus::{write_corpus, CorpusFormat};
use semchange_core::gibbs::{PosteriorTrajectory, Preset};
use semchange_core::model::{forward_simulate, Allocation, ModelConfig, TrajectorySpec};
use serde::Serialize;
use serde_json::json;

use super::{finish, InputError, Invocation, ManifestParts, OutputArgs, Status};
use crate::output::file_stem;

pub const TRUTH_FORMAT: &str = "semchange-simulation-truth";

#[derive(Debug, Clone, Args)]
#[command(group = clap::ArgGroup::new("allocation").required(true).multiple(false))]
pub struct SimulateArgs {
    /// Hyperparameters (a, b, kappa_psi) come from this preset.
    #[arg(long, default_value = "latin-default", value_parser = super::train::parse_preset)]
    pub preset: Preset,
    #[arg(long, default_value_t = ModelConfig::DEFAULT_SENSES)]
    pub senses: usize,
    #[arg(long, default_value_t = 1)]
    pub genres: usize,
    #[arg(long, default_value_t = 2)]
    pub time_bins: usize,
    #[arg(long, default_value_t = 50)]
    pub vocab_size: usize,
    /// Context lemmas on each side of the target.
    #[arg(long, default_value_t = ModelConfig::DEFAULT_WINDOW)]
    pub window: usize,
    /// Snippets per time bin, genres drawn from the genre proportions.
    #[arg(long, group = "allocation")]
    pub per_bin: Option<usize>,
    /// Snippets per (time bin, genre) pair.
    #[arg(long, group = "allocation")]
    pub per_bin_genre: Option<usize>,
    /// JSON file with planted `phi` ([T][G][K]), `psi` ([T][K][V]) and
    /// `genre_proportions`; anything left out is drawn from the prior.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Lemma written for the target word.
    #[arg(long, default_value = "target")]
    pub target: String,
    /// Genre labels, comma-separated; `g0`, `g1`, ... by default.
    #[arg(long, value_delimiter = ',')]
    pub genre_labels: Option<Vec<String>>,
    #[arg(long, default_value = "jsonl")]
    pub format: CorpusFormat,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Ground truth written next to a simulated corpus.
#[derive(Debug, Serialize)]
struct Truth<'a> {
    format: &'a str,
    target: &'a str,
    model: &'a ModelConfig,
    genre_labels: &'a [String],
    seed: u64,
    doc_ids: Vec<&'a str>,
    true_z: &'a [usize],
    state: semchange_core::model::StateDocument,
}

fn genre_labels(args: &SimulateArgs, genres: usize) -> Result<Vec<String>> {
    let labels = match &args.genre_labels {
        Some(l) => l.clone(),
        None => {
            let width = genres.saturating_sub(1).to_string().len();
            (0..genres).map(|g| format!("g{g:0width$}")).collect()
        }
    };
    if labels.len() != genres {
        anyhow::bail!(InputError(format!("{} genre labels for {genres} genres", labels.len())));
    }
    if labels.iter().any(|l| l.is_empty() || l.contains(char::is_whitespace)) {
        anyhow::bail!(InputError("genre labels must be non-empty and without whitespace".into()));
    }
    let mut sorted = labels.clone();
    sorted.sort();
    // Ingestion indexes genres in sorted order, so labels must already be.
    if sorted != labels || labels.iter().collect::<BTreeSet<_>>().len() != labels.len() {
        anyhow::bail!(InputError("genre labels must be unique and sorted".into()));
    }
    Ok(labels)
}

pub fn run(args: SimulateArgs, inv: &Invocation) -> Result<Status> {
    if args.target.is_empty() || args.target.contains(char::is_whitespace) {
        anyhow::bail!(InputError("--target must be a single non-empty token".into()));
    }
    let genres = if args.preset.collapses_genres() { 1 } else { args.genres };
    let mut model = args
        .preset
        .model_config(args.senses, genres, args.time_bins, args.vocab_size);
    model.window = args.window;
    model.validate()?;
    let labels = genre_labels(&args, genres)?;
    if (0..args.vocab_size).any(|w| semchange_core::model::synthetic_lemma(w, args.vocab_size) == args.target) {
        anyhow::bail!(InputError(format!("target `{}` collides with a context lemma", args.target)));
    }

    let spec: TrajectorySpec = match &args.spec {
        Some(path) => serde_json::from_str(&super::read_text(path)?)
            .with_context(|| format!("{} is not a trajectory spec", path.display()))
            .map_err(|e| InputError(format!("{e:#}")))?,
        None => TrajectorySpec::default(),
    };
    let allocation = match (args.per_bin, args.per_bin_genre) {
        (Some(n), _) => Allocation::PerBin(n),
        (_, Some(n)) => Allocation::PerBinGenre(n),
        _ => unreachable!("clap requires one allocation flag"),
    };
    if matches!(allocation, Allocation::PerBin(0) | Allocation::PerBinGenre(0)) {
        anyhow::bail!(InputError("snippet count must be positive".into()));
    }

    let sim = forward_simulate(&model, &spec, allocation, args.seed)?;
    info!("simulated {} snippets", sim.snippets.len());
    let documents = sim.to_documents(&args.target, args.vocab_size, &labels);
    let corpus_name = match args.format {
        CorpusFormat::Jsonl => "corpus.jsonl",
        CorpusFormat::Tsv => "corpus.tsv",
    };

    let phi = sim.true_state.phi();
    let truth_trajectory = PosteriorTrajectory {
        std: Array3::zeros(phi.raw_dim()),
        mean: phi,
        n_samples: 1,
        genre_labels: labels.clone(),
    };
    let truth = Truth {
        format: TRUTH_FORMAT,
        target: &args.target,
        model: &model,
        genre_labels: &labels,
        seed: args.seed,
        doc_ids: sim.snippets.iter().map(|s| s.doc_id.as_str()).collect(),
        true_z: &sim.true_z,
        state: sim.true_state.to_document(),
    };

    let staged = args.output.stage()?;
    staged.write(corpus_name, write_corpus(&documents, args.format)?)?;
    staged.write("truth.json", serde_json::to_string(&truth)? + "\n")?;
    staged.write(
        format!("trajectories/{}.csv", file_stem(&args.target)),
        truth_trajectory.to_csv()?,
    )?;

    finish(
        staged,
        inv,
        ManifestParts {
            command: "simulate",
            inputs: args.spec.iter().cloned().collect(),
            seed: Some(args.seed),
            workers: 1,
            config: json!({
                "preset": args.preset,
                "model": model,
                "allocation": allocation,
                "spec": spec,
                "target": args.target,
                "genre_labels": labels,
                "format": args.format,
            }),
        },
    )?;
    Ok(Status::Success)
}
