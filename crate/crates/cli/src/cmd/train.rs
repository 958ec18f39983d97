use std::collections::BTreeMap;

use anyhow::{Context, Result};
use clap::Args;
use log::info;
use rayon::prelude::*;
use semchange_core::corpus::{build_vocabulary, extract_snippets, Snippet, Vocabulary};
use semchange_core::gibbs::{run_chain, Preset, SamplerConfig};
use semchange_core::model::ModelConfig;
use serde_json::json;

use super::{finish, CorpusArgs, Invocation, ManifestParts, OutputArgs, Status, TargetArgs};
use crate::output::file_stem;

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub targets: TargetArgs,
    /// Hyperparameter preset: latin-default, greek-gasc or scan (one genre).
    #[arg(long, default_value = "latin-default", value_parser = parse_preset)]
    pub preset: Preset,
    /// Number of senses.
    #[arg(long, default_value_t = ModelConfig::DEFAULT_SENSES)]
    pub senses: usize,
    /// Context lemmas taken on each side of a target.
    #[arg(long, default_value_t = ModelConfig::DEFAULT_WINDOW)]
    pub window: usize,
    /// Drop context lemmas seen fewer times than this around the target.
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    /// Gibbs sweeps including burn-in; the preset's value by default.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thinning: Option<usize>,
    /// Keep the sense assignments of every retained sample in the checkpoint.
    #[arg(long)]
    pub record_assignments: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Targets trained in parallel. Every chain is seeded on its own, so the
    /// outputs are the same for any worker count; manifests are replayed
    /// with the recorded count.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub(crate) fn parse_preset(name: &str) -> std::result::Result<Preset, String> {
    Preset::from_name(name).map_err(|e| e.to_string())
}

struct Prepared {
    lemma: String,
    vocab: Vocabulary,
    snippets: Vec<Snippet>,
    model: ModelConfig,
}

pub fn run(args: TrainArgs, inv: &Invocation) -> Result<Status> {
    anyhow::ensure!(args.workers > 0, super::InputError("--workers must be positive".into()));
    let targets = args.targets.load()?;
    let corpus = args.corpus.load(args.preset.collapses_genres())?;
    let genre_labels = corpus.genres.labels().to_vec();

    let mut sampler = args.preset.sampler_config(args.seed);
    if let Some(n) = args.iterations {
        sampler.iterations = n;
    }
    if let Some(n) = args.burn_in {
        sampler.burn_in = n;
    }
    if let Some(n) = args.thinning {
        sampler.thinning = n;
    }
    sampler.record_assignments = args.record_assignments;
    sampler.validate()?;

    // Every target is checked before any sampling so that a bad target
    // leaves no outputs behind.
    let mut prepared = Vec::with_capacity(targets.len());
    for lemma in &targets {
        let raw = extract_snippets(&corpus, lemma, args.window)?;
        if raw.is_empty() {
            return Err(semchange_core::Error::NoSnippets(lemma.clone()).into());
        }
        let (vocab, snippets) = build_vocabulary(&raw, args.min_count)
            .with_context(|| format!("target `{lemma}`"))?;
        let model = ModelConfig {
            window: args.window,
            ..args
                .preset
                .model_config(args.senses, corpus.genres.len(), corpus.time_bins(), vocab.len())
        };
        model.validate()?;
        info!("{lemma}: {} snippets, {} context lemmas", snippets.len(), vocab.len());
        prepared.push(Prepared {
            lemma: lemma.clone(),
            vocab,
            snippets,
            model,
        });
    }

    let staged = args.output.stage()?;
    let chain_config = SamplerConfig {
        workers: 1,
        ..sampler.clone()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers)
        .build()
        .context("cannot start worker threads")?;
    let results: Vec<Result<(String, String, String)>> = pool.install(|| {
        prepared
            .par_iter()
            .map(|p| {
                let (store, trajectory) = run_chain(&p.snippets, &p.model, &chain_config)
                    .with_context(|| format!("sampling `{}`", p.lemma))?;
                let csv = trajectory.with_genre_labels(&genre_labels)?.to_csv()?;
                info!("{}: done", p.lemma);
                Ok((p.lemma.clone(), store.to_json()?, csv))
            })
            .collect()
    });

    let mut summary = String::from("lemma\tfile\tsnippets\tvocabulary\n");
    for (p, result) in prepared.iter().zip(results) {
        let (lemma, checkpoint, csv) = result?;
        let stem = file_stem(&lemma);
        staged.write(format!("checkpoints/{stem}.json"), checkpoint)?;
        staged.write(format!("trajectories/{stem}.csv"), csv)?;
        let mut vocab_text = p.vocab.lemmas().join("\n");
        vocab_text.push('\n');
        staged.write(format!("vocabulary/{stem}.txt"), vocab_text)?;
        summary.push_str(&format!(
            "{lemma}\t{stem}\t{}\t{}\n",
            p.snippets.len(),
            p.vocab.len()
        ));
    }
    staged.write("targets.tsv", summary)?;

    let models: BTreeMap<&str, &ModelConfig> =
        prepared.iter().map(|p| (p.lemma.as_str(), &p.model)).collect();
    let mut inputs = vec![args.corpus.corpus.clone()];
    inputs.extend(args.targets.input_files());
    finish(
        staged,
        inv,
        ManifestParts {
            command: "train",
            inputs,
            seed: Some(args.seed),
            workers: args.workers,
            config: json!({
                "preset": args.preset,
                "format": args.corpus.format(),
                "bin_edges": corpus.binning.edges(),
                "genres": genre_labels,
                "targets": targets,
                "window": args.window,
                "min_count": args.min_count,
                "sampler": sampler,
                "models": models,
            }),
        },
    )?;
    Ok(Status::Success)
}
