use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use log::{info, warn};
use semchange_core::eval::{confusion, load_gold, load_predictions, Report, REPORT_SCHEMA};
use serde_json::json;

use super::{finish, Invocation, ManifestParts, OutputArgs, Status};

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Decision TSV: lemma and 0/1 in the first two columns.
    #[arg(long)]
    pub decisions: PathBuf,
    /// Gold labels: lemma and 0/1 per line, optional `#key: value` metadata.
    #[arg(long)]
    pub gold: PathBuf,
    /// Extra `key=value` metadata for the report (repeatable).
    #[arg(long = "meta", value_parser = parse_meta)]
    pub meta: Vec<(String, String)>,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_meta(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got `{s}`"))
}

pub fn run(args: EvaluateArgs, inv: &Invocation) -> Result<Status> {
    let gold = load_gold(&args.gold)?;
    let predictions = load_predictions(&args.decisions)?;
    let comparison = confusion(&predictions, &gold)?;
    if !comparison.ignored.is_empty() {
        warn!(
            "{} predicted lemmas are not in the gold standard",
            comparison.ignored.len()
        );
    }
    let mut metadata: BTreeMap<String, String> = gold.metadata.clone();
    metadata.extend(args.meta.iter().cloned());
    let report = Report::new(&comparison, metadata);
    let text = report.to_text();
    info!("{}", text.lines().last().unwrap_or_default());

    let staged = args.output.stage()?;
    staged.write("report.txt", &text)?;
    staged.write("report.json", report.to_json() + "\n")?;
    staged.write("report.schema.json", REPORT_SCHEMA)?;
    print!("{text}");
    finish(
        staged,
        inv,
        ManifestParts {
            command: "evaluate",
            inputs: vec![args.decisions.clone(), args.gold.clone()],
            seed: None,
            workers: 1,
            config: json!({ "metadata": args.meta.iter().cloned().collect::<BTreeMap<_, _>>() }),
        },
    )?;
    Ok(Status::Success)
}
