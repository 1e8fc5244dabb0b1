use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "edgesim", version, about = "Energy and behaviour experiments for edge-robotics MAC accelerators")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default, Clone)]
pub struct GlobalArgs {
    /// Base seed, hex (0xACE1) or decimal; replicate k uses seed + k.
    #[arg(long, global = true, value_parser = parse_seed)]
    pub seed: Option<u16>,
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelArg>,
    /// Energy coefficients as TOML (as written by `calibrate`).
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write SVG charts.
    #[arg(long, global = true)]
    pub plot: bool,
    #[arg(long, global = true)]
    pub replicates: Option<u32>,
    /// TOML file with [global], [mac], [qnav], [swarm] and [slam] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Digital,
    Tdms,
    Hdms,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit energy coefficients to the reference anchors.
    Calibrate,
    #[command(subcommand)]
    Mac(MacCommand),
    #[command(subcommand)]
    Qnav(QnavCommand),
    #[command(subcommand)]
    Swarm(SwarmCommand),
    #[command(subcommand)]
    Slam(SlamCommand),
    /// Re-run the experiment recorded in a manifest and compare outputs.
    Replay {
        manifest: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum MacCommand {
    /// Exhaustive mean energy per bit width.
    Sweep {
        /// Inclusive range such as `3..8`, or a single width.
        #[arg(long)]
        bits: Option<String>,
    },
    /// Energy of every operand pair at one width.
    Surface {
        #[arg(long)]
        bits: Option<u8>,
    },
}

#[derive(Debug, Subcommand)]
pub enum QnavCommand {
    Train {
        /// Arena text file (`#` obstacle, `.` free, `S` start).
        #[arg(long)]
        arena: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        #[arg(long)]
        drop_p: Option<f64>,
        /// Keep training after convergence.
        #[arg(long)]
        full_budget: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Deterministic,
    Stochastic,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum SwarmCommand {
    Run {
        /// path, formation, predprey or explore; comma separated or `all`.
        #[arg(long)]
        task: Option<String>,
        /// Comma-separated swarm sizes.
        #[arg(long)]
        agents: Option<String>,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Hardware,
    Reference,
}

#[derive(Debug, Subcommand)]
pub enum SlamCommand {
    Run {
        /// World description (`key = value` lines).
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long, value_enum)]
        loop_closure: Option<LoopArg>,
        #[arg(long)]
        noise: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LoopArg {
    On,
    Off,
    Both,
}

pub fn parse_seed(s: &str) -> Result<u16, String> {
    let t = s.trim();
    let v = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u16::from_str_radix(hex, 16),
        None => t.parse::<u16>(),
    }
    .map_err(|e| format!("bad seed `{s}`: {e}"))?;
    if v == 0 {
        return Err("seed must be nonzero".into());
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds() {
        assert_eq!(parse_seed("0xACE1"), Ok(0xACE1));
        assert_eq!(parse_seed("44257"), Ok(0xACE1));
        assert!(parse_seed("0").is_err());
        assert!(parse_seed("0x10000").is_err());
    }

    #[test]
    fn parses_nested_commands() {
        let cli = Cli::try_parse_from(["edgesim", "--seed", "0x1", "swarm", "run", "--task", "path", "--plot"]).unwrap();
        assert_eq!(cli.global.seed, Some(1));
        assert!(cli.global.plot);
        assert!(matches!(cli.command, Command::Swarm(SwarmCommand::Run { .. })));
        assert!(Cli::try_parse_from(["edgesim", "dance"]).is_err());
    }
}
