use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use log::warn;
use semchange_core::changepoint::{
    decision_row, detect_change_batch, DecisionRule, PairScope, SpreadRule, DECISION_HEADER,
};
use semchange_core::gibbs::PosteriorTrajectory;
use serde_json::json;

use super::{finish, Invocation, ManifestParts, OutputArgs, Status};
use crate::output::lemma_from_stem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pairs {
    /// Every pair of time bins.
    AnyPair,
    /// First against last bin only.
    Endpoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Spread {
    /// The larger of the two standard deviations.
    Max,
    /// Root mean square of the two standard deviations.
    Pooled,
    /// The smaller of the two standard deviations.
    Either,
}

#[derive(Debug, Clone, Args)]
pub struct RuleArgs {
    #[arg(long, value_enum, default_value_t = Pairs::AnyPair)]
    pub pairs: Pairs,
    #[arg(long, value_enum, default_value_t = Spread::Max)]
    pub spread: Spread,
    /// Required difference in standard deviations.
    #[arg(long, default_value_t = 2.0)]
    pub sigmas: f64,
}

impl RuleArgs {
    pub fn rule(&self) -> DecisionRule {
        DecisionRule {
            pairs: match self.pairs {
                Pairs::AnyPair => PairScope::AnyPair,
                Pairs::Endpoints => PairScope::Endpoints,
            },
            spread: match self.spread {
                Spread::Max => SpreadRule::Max,
                Spread::Pooled => SpreadRule::Pooled,
                Spread::Either => SpreadRule::Either,
            },
            sigmas: self.sigmas,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DetectArgs {
    /// Trajectory CSV files, or directories searched for `*.csv`. The lemma
    /// is the file name without extension, as written by `train`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub rule: RuleArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn collect_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .with_context(|| format!("cannot list {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "csv"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        anyhow::bail!(super::InputError("no trajectory files found".into()));
    }
    Ok(files)
}

fn lemma_of(path: &Path) -> Result<String> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .with_context(|| format!("{} has no usable file name", path.display()))?;
    lemma_from_stem(stem)
}

pub fn run(args: DetectArgs, inv: &Invocation) -> Result<Status> {
    anyhow::ensure!(
        args.rule.sigmas.is_finite() && args.rule.sigmas > 0.0,
        super::InputError(format!("--sigmas must be positive, got {}", args.rule.sigmas))
    );
    let files = collect_files(&args.inputs)?;
    let rule = args.rule.rule();

    let mut trajectories = BTreeMap::new();
    let mut failures: BTreeMap<String, String> = BTreeMap::new();
    let mut numeric_only = true;
    for path in &files {
        let key = path.display().to_string();
        let parsed = lemma_of(path).and_then(|lemma| {
            let traj = PosteriorTrajectory::from_csv(&super::read_text(path)?)?;
            Ok((lemma, traj))
        });
        match parsed {
            Ok((lemma, _)) if trajectories.contains_key(&lemma) => {
                failures.insert(key, format!("duplicate lemma `{lemma}`"));
                numeric_only = false;
            }
            Ok((lemma, traj)) => {
                trajectories.insert(lemma, traj);
            }
            Err(e) => {
                failures.insert(key, format!("{e:#}"));
                numeric_only = false;
            }
        }
    }

    let batch = if trajectories.is_empty() {
        None
    } else {
        Some(detect_change_batch(&trajectories, &rule)?)
    };
    if let Some(batch) = &batch {
        for (lemma, err) in &batch.errors {
            numeric_only &= err.is_numeric();
            failures.insert(lemma.clone(), err.to_string());
        }
    }
    let decided = batch.as_ref().map_or(0, |b| b.decisions.len());
    if decided == 0 {
        let listing: Vec<String> = failures.iter().map(|(k, v)| format!("{k}: {v}")).collect();
        let message = format!("no trajectory could be decided:\n  {}", listing.join("\n  "));
        return Err(if numeric_only {
            semchange_core::Error::Degenerate(message).into()
        } else {
            super::InputError(message).into()
        });
    }
    let batch = batch.expect("some decisions were made");

    let staged = args.output.stage()?;
    let mut tsv = format!("{DECISION_HEADER}\n");
    for (lemma, decision) in &batch.decisions {
        let labels = &trajectories[lemma].genre_labels;
        tsv.push_str(&decision_row(lemma, decision, Some(labels)));
        tsv.push('\n');
    }
    staged.write("decisions.tsv", tsv)?;
    if !failures.is_empty() {
        let mut errors = String::from("input\terror\n");
        for (input, message) in &failures {
            warn!("{input}: {message}");
            errors.push_str(&format!("{input}\t{}\n", message.replace(['\n', '\t'], " ")));
        }
        staged.write("errors.tsv", errors)?;
    }

    finish(
        staged,
        inv,
        ManifestParts {
            command: "detect",
            inputs: files.into_iter().filter(|p| p.is_file()).collect(),
            seed: None,
            workers: 1,
            config: json!({ "rule": rule }),
        },
    )?;
    Ok(if failures.is_empty() {
        Status::Success
    } else {
        Status::Partial
    })
}
