//! Experiment runner behind the `edgesim` command.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod report;
pub mod svg;

use anyhow::{bail, Result};
use cli::{Cli, Command};
use std::io::Write;

/// Executes one parsed command, writing a short summary to `log`.
pub fn execute(cli: &Cli, log: &mut impl Write) -> Result<()> {
    if let Command::Replay { manifest } = &cli.command {
        let r = report::replay(manifest)?;
        if let Some(out) = &cli.global.out {
            report::emit_report(&r.manifest.config, &r.bundle, out)?;
        }
        if !r.mismatches.is_empty() {
            bail!("replay differs from {}: {}", manifest.display(), r.mismatches.join(", "));
        }
        writeln!(log, "replay of {} matches ({} files)", r.manifest.experiment, r.manifest.files.len())?;
        return Ok(());
    }
    let (cfg, out) = config::resolve(cli)?;
    let bundle = experiments::run_experiment(&cfg)?;
    let manifest = report::emit_report(&cfg, &bundle, &out)?;
    writeln!(log, "{}: wrote {} files to {}", cfg.experiment.name(), manifest.files.len() + 1, out.display())?;
    Ok(())
}
