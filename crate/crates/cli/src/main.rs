//! `semchange`: Bayesian sense-change models, embedding baselines and
//! evaluation from the command line.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | input or configuration error (bad files, unknown targets, no snippets) |
//! | 3 | model or numeric failure (degenerate state) |
//! | 4 | partial failure: some inputs processed, the rest listed in the output |

mod cmd;
mod manifest;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cmd::Status;

#[derive(Debug, Parser)]
#[command(name = "semchange", version, about = "Lexical semantic change detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the dynamic sense model to every target and export trajectories.
    Train(cmd::train::TrainArgs),
    /// Apply the two-sigma change rule to trajectory CSV files.
    Detect(cmd::detect::DetectArgs),
    /// Score targets with an embedding baseline and threshold the scores.
    Baseline(cmd::baseline::BaselineArgs),
    /// Compare change decisions with a gold standard.
    Evaluate(cmd::evaluate::EvaluateArgs),
    /// Generate a synthetic corpus from the generative model.
    Simulate(cmd::simulate::SimulateArgs),
    /// Re-run the command recorded in a run manifest.
    Replay(cmd::replay::ReplayArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    match dispatch(cli.command, &argv[1..]) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(cmd::EXIT_PARTIAL),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(cmd::exit_code(&err))
        }
    }
}

fn dispatch(command: Command, argv: &[String]) -> anyhow::Result<Status> {
    let inv = cmd::Invocation::current(argv)?;
    match command {
        Command::Train(args) => cmd::train::run(args, &inv),
        Command::Detect(args) => cmd::detect::run(args, &inv),
        Command::Baseline(args) => cmd::baseline::run(args, &inv),
        Command::Evaluate(args) => cmd::evaluate::run(args, &inv),
        Command::Simulate(args) => cmd::simulate::run(args, &inv),
        Command::Replay(args) => cmd::replay::run(args),
    }
}

/// Parse a recorded argument list and run it with a different output
/// directory.
pub(crate) fn rerun(
    argv: &[String],
    out: std::path::PathBuf,
    force: bool,
    inv: &cmd::Invocation,
) -> anyhow::Result<Status> {
    let cli = Cli::try_parse_from(std::iter::once("semchange".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| anyhow::anyhow!(cmd::InputError(format!("manifest arguments do not parse: {e}"))))?;
    let mut command = cli.command;
    let slot = match &mut command {
        Command::Train(a) => &mut a.output,
        Command::Detect(a) => &mut a.output,
        Command::Baseline(a) => &mut a.output,
        Command::Evaluate(a) => &mut a.output,
        Command::Simulate(a) => &mut a.output,
        Command::Replay(_) => {
            anyhow::bail!(cmd::InputError("a replay manifest cannot replay another replay".into()))
        }
    };
    slot.out = Some(out);
    slot.force = force;
    match command {
        Command::Train(args) => cmd::train::run(args, inv),
        Command::Detect(args) => cmd::detect::run(args, inv),
        Command::Baseline(args) => cmd::baseline::run(args, inv),
        Command::Evaluate(args) => cmd::evaluate::run(args, inv),
        Command::Simulate(args) => cmd::simulate::run(args, inv),
        Command::Replay(_) => unreachable!(),
    }
}
