use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use log::info;

use super::{InputError, Invocation, Status};
use crate::manifest::{sha256_file, unix_now, RunManifest};

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// A `manifest.json` written by any other command.
    pub manifest: PathBuf,
    /// Output directory for the re-run.
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
    /// Run even if an input file changed since the recorded run.
    #[arg(long)]
    pub skip_digest_check: bool,
}

pub fn run(args: ReplayArgs) -> Result<Status> {
    let manifest = RunManifest::load(&args.manifest).map_err(|e| InputError(format!("{e:#}")))?;
    if manifest.tool_version != env!("CARGO_PKG_VERSION") {
        log::warn!(
            "manifest written by version {}, replaying with {}",
            manifest.tool_version,
            env!("CARGO_PKG_VERSION")
        );
    }
    // Resolve the output against the caller's directory before moving into
    // the recorded one, where relative input paths are valid.
    let out = std::path::absolute(&args.out)
        .with_context(|| format!("cannot resolve {}", args.out.display()))?;
    std::env::set_current_dir(&manifest.cwd).with_context(|| {
        format!("recorded working directory {} is not accessible", manifest.cwd.display())
    })?;

    for input in &manifest.inputs {
        let digest = sha256_file(&input.path)
            .map_err(|e| InputError(format!("{e:#}")))?;
        if digest != input.sha256 {
            let message = format!("{} changed since the recorded run", input.path.display());
            if args.skip_digest_check {
                log::warn!("{message}");
            } else {
                anyhow::bail!(InputError(message));
            }
        }
    }
    info!("replaying `{}`", manifest.argv.join(" "));
    let inv = Invocation {
        argv: manifest.argv.clone(),
        cwd: manifest.cwd.clone(),
        started: unix_now(),
    };
    crate::rerun(&manifest.argv, out, args.force, &inv)
}
