//! Run configuration. Precedence: command-line flags, then the config file,
//! then built-in defaults.

use crate::cli::{self, Cli, Command, LoopArg, MacCommand, ModeArg, ModelArg, QnavCommand, SlamCommand, SwarmCommand, VariantArg};
use anyhow::{bail, Context, Result};
use edgesim_core::macmodel::{EnergyParams, MacModel};
use edgesim_core::swarmlab::Workload;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Calibrate,
    MacSweep,
    MacSurface,
    QnavTrain,
    SwarmRun,
    SlamRun,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Calibrate => "calibrate",
            Experiment::MacSweep => "mac sweep",
            Experiment::MacSurface => "mac surface",
            Experiment::QnavTrain => "qnav train",
            Experiment::SwarmRun => "swarm run",
            Experiment::SlamRun => "slam run",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Deterministic,
    Stochastic,
    Both,
}

impl Variant {
    pub fn flags(self) -> &'static [bool] {
        match self {
            Variant::Deterministic => &[false],
            Variant::Stochastic => &[true],
            Variant::Both => &[false, true],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopMode {
    On,
    Off,
    Both,
}

impl LoopMode {
    pub fn flags(self) -> &'static [bool] {
        match self {
            LoopMode::On => &[true],
            LoopMode::Off => &[false],
            LoopMode::Both => &[true, false],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacSettings {
    pub bits_lo: u8,
    pub bits_hi: u8,
    pub surface_bits: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QnavSettings {
    pub episodes: usize,
    pub steps: usize,
    pub variant: Variant,
    pub drop_p: f64,
    pub stop_at_convergence: bool,
    /// Arena text; the built-in arena when absent.
    pub arena: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwarmSettings {
    pub tasks: Vec<String>,
    pub agents: Vec<usize>,
    pub budget: u64,
    /// `hardware` or `reference`.
    pub mode: String,
    /// Scenario text; generated from the seed when absent.
    pub scenario: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlamSettings {
    pub loop_closure: LoopMode,
    pub noise_sigma: Option<f64>,
    /// World text; the square loop textured from the seed when absent.
    pub world: Option<String>,
}

/// Everything needed to reproduce a run; external files are inlined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u16,
    pub replicates: u32,
    pub plot: bool,
    pub model: Option<MacModel>,
    pub params: EnergyParams,
    pub mac: MacSettings,
    pub qnav: QnavSettings,
    pub swarm: SwarmSettings,
    pub slam: SlamSettings,
}

impl RunConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: 0xACE1,
            replicates: 1,
            plot: false,
            model: None,
            params: EnergyParams::default(),
            mac: MacSettings { bits_lo: 3, bits_hi: 8, surface_bits: 6 },
            qnav: QnavSettings {
                episodes: 300,
                steps: 200,
                variant: Variant::Both,
                drop_p: 0.25,
                stop_at_convergence: true,
                arena: None,
            },
            swarm: SwarmSettings {
                tasks: vec!["path".into()],
                agents: vec![2, 5, 11, 20],
                budget: 600,
                mode: "hardware".into(),
                scenario: None,
            },
            slam: SlamSettings { loop_closure: LoopMode::Both, noise_sigma: None, world: None },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed == 0 {
            bail!("seed must be nonzero");
        }
        if self.replicates == 0 {
            bail!("replicates must be at least 1");
        }
        if self.seed as u32 + self.replicates - 1 > u16::MAX as u32 {
            bail!("seeds {:#06x} + {} replicates overflow 16 bits", self.seed, self.replicates);
        }
        self.params.validate()?;
        let m = &self.mac;
        if !(3..=8).contains(&m.bits_lo) || !(3..=8).contains(&m.bits_hi) || m.bits_lo > m.bits_hi {
            bail!("mac bit range {}..{} must lie within 3..8", m.bits_lo, m.bits_hi);
        }
        if !(3..=8).contains(&m.surface_bits) {
            bail!("surface bits {} outside 3..8", m.surface_bits);
        }
        for t in &self.swarm.tasks {
            t.parse::<Workload>()?;
        }
        if self.swarm.tasks.is_empty() || self.swarm.agents.is_empty() {
            bail!("swarm needs at least one task and one swarm size");
        }
        if !matches!(self.swarm.mode.as_str(), "hardware" | "reference") {
            bail!("swarm mode must be `hardware` or `reference`, got `{}`", self.swarm.mode);
        }
        Ok(())
    }

    /// Replicate seeds in order.
    pub fn seeds(&self) -> Vec<u16> {
        (0..self.replicates).map(|k| self.seed + k as u16).collect()
    }
}

/// Config file layout. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub global: FileGlobal,
    #[serde(default)]
    pub mac: FileMac,
    #[serde(default)]
    pub qnav: FileQnav,
    #[serde(default)]
    pub swarm: FileSwarm,
    #[serde(default)]
    pub slam: FileSlam,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum SeedValue {
    Int(i64),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileGlobal {
    pub seed: Option<SeedValue>,
    pub model: Option<MacModel>,
    pub params: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub plot: Option<bool>,
    pub replicates: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileMac {
    pub bits: Option<String>,
    pub surface_bits: Option<u8>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileQnav {
    pub arena: Option<PathBuf>,
    pub episodes: Option<usize>,
    pub steps: Option<usize>,
    pub variant: Option<Variant>,
    pub drop_p: Option<f64>,
    pub stop_at_convergence: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSwarm {
    pub task: Option<String>,
    pub agents: Option<Vec<usize>>,
    pub budget: Option<u64>,
    pub mode: Option<String>,
    pub scenario: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSlam {
    pub world: Option<PathBuf>,
    pub loop_closure: Option<LoopMode>,
    pub noise_sigma: Option<f64>,
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn load_file_config(path: &Path) -> Result<FileConfig> {
    let text = read_text(path)?;
    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

pub fn load_params(path: &Path) -> Result<EnergyParams> {
    let text = read_text(path)?;
    let p: EnergyParams = toml::from_str(&text).with_context(|| format!("invalid parameters {}", path.display()))?;
    p.validate().with_context(|| format!("invalid parameters {}", path.display()))?;
    Ok(p)
}

/// Parses `3..8`, `3..=8` or a single width.
pub fn parse_bits_range(s: &str) -> Result<(u8, u8)> {
    let t = s.trim();
    let parse = |v: &str| v.trim().parse::<u8>().with_context(|| format!("bad bit width in `{s}`"));
    if let Some((a, b)) = t.split_once("..") {
        Ok((parse(a)?, parse(b.trim_start_matches('='))?))
    } else {
        let b = parse(t)?;
        Ok((b, b))
    }
}

fn parse_tasks(s: &str) -> Result<Vec<String>> {
    if s.trim() == "all" {
        return Ok(Workload::ALL.iter().map(|w| w.name().to_string()).collect());
    }
    let tasks: Vec<String> = s.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect();
    for t in &tasks {
        t.parse::<Workload>()?;
    }
    Ok(tasks)
}

fn parse_agents(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(|v| v.trim().parse::<usize>().with_context(|| format!("bad swarm size in `{s}`"))).collect()
}

fn model_of(m: ModelArg) -> MacModel {
    match m {
        ModelArg::Digital => MacModel::Digital,
        ModelArg::Tdms => MacModel::Tdms,
        ModelArg::Hdms => MacModel::Hdms,
    }
}

fn seed_of(v: &SeedValue) -> Result<u16> {
    match v {
        SeedValue::Int(i) => {
            let s = u16::try_from(*i).with_context(|| format!("seed {i} is not a 16-bit value"))?;
            cli::parse_seed(&s.to_string()).map_err(anyhow::Error::msg)
        }
        SeedValue::Text(t) => cli::parse_seed(t).map_err(anyhow::Error::msg),
    }
}

/// Resolved configuration and output directory for an experiment command.
pub fn resolve(cli: &Cli) -> Result<(RunConfig, PathBuf)> {
    let experiment = match &cli.command {
        Command::Calibrate => Experiment::Calibrate,
        Command::Mac(MacCommand::Sweep { .. }) => Experiment::MacSweep,
        Command::Mac(MacCommand::Surface { .. }) => Experiment::MacSurface,
        Command::Qnav(_) => Experiment::QnavTrain,
        Command::Swarm(_) => Experiment::SwarmRun,
        Command::Slam(_) => Experiment::SlamRun,
        Command::Replay { .. } => bail!("replay takes its configuration from the manifest"),
    };
    let file = match &cli.global.config {
        Some(p) => load_file_config(p)?,
        None => FileConfig::default(),
    };
    let g = &cli.global;
    let mut cfg = RunConfig::defaults(experiment);

    if let Some(s) = &file.global.seed {
        cfg.seed = seed_of(s)?;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.model = g.model.map(model_of).or(file.global.model);
    cfg.plot = g.plot || file.global.plot.unwrap_or(false);
    cfg.replicates = g.replicates.or(file.global.replicates).unwrap_or(1);
    if let Some(p) = g.params.as_ref().or(file.global.params.as_ref()) {
        cfg.params = load_params(p)?;
    }
    let out = g.out.clone().or(file.global.out.clone()).unwrap_or_else(|| PathBuf::from("out"));

    if let Some(b) = &file.mac.bits {
        (cfg.mac.bits_lo, cfg.mac.bits_hi) = parse_bits_range(b)?;
    }
    if let Some(b) = file.mac.surface_bits {
        cfg.mac.surface_bits = b;
    }
    let q = &file.qnav;
    cfg.qnav.episodes = q.episodes.unwrap_or(cfg.qnav.episodes);
    cfg.qnav.steps = q.steps.unwrap_or(cfg.qnav.steps);
    cfg.qnav.variant = q.variant.unwrap_or(cfg.qnav.variant);
    cfg.qnav.drop_p = q.drop_p.unwrap_or(cfg.qnav.drop_p);
    cfg.qnav.stop_at_convergence = q.stop_at_convergence.unwrap_or(cfg.qnav.stop_at_convergence);
    let mut arena_path = q.arena.clone();
    let s = &file.swarm;
    if let Some(t) = &s.task {
        cfg.swarm.tasks = parse_tasks(t)?;
    }
    if let Some(a) = &s.agents {
        cfg.swarm.agents = a.clone();
    }
    cfg.swarm.budget = s.budget.unwrap_or(cfg.swarm.budget);
    if let Some(m) = &s.mode {
        cfg.swarm.mode = m.clone();
    }
    let mut scenario_path = s.scenario.clone();
    cfg.slam.loop_closure = file.slam.loop_closure.unwrap_or(cfg.slam.loop_closure);
    cfg.slam.noise_sigma = file.slam.noise_sigma.or(cfg.slam.noise_sigma);
    let mut world_path = file.slam.world.clone();

    match &cli.command {
        Command::Mac(MacCommand::Sweep { bits: Some(b) }) => (cfg.mac.bits_lo, cfg.mac.bits_hi) = parse_bits_range(b)?,
        Command::Mac(MacCommand::Surface { bits: Some(b) }) => cfg.mac.surface_bits = *b,
        Command::Qnav(QnavCommand::Train { arena, episodes, steps, variant, drop_p, full_budget }) => {
            arena_path = arena.clone().or(arena_path);
            cfg.qnav.episodes = episodes.unwrap_or(cfg.qnav.episodes);
            cfg.qnav.steps = steps.unwrap_or(cfg.qnav.steps);
            if let Some(v) = variant {
                cfg.qnav.variant = match v {
                    VariantArg::Deterministic => Variant::Deterministic,
                    VariantArg::Stochastic => Variant::Stochastic,
                    VariantArg::Both => Variant::Both,
                };
            }
            cfg.qnav.drop_p = drop_p.unwrap_or(cfg.qnav.drop_p);
            if *full_budget {
                cfg.qnav.stop_at_convergence = false;
            }
        }
        Command::Swarm(SwarmCommand::Run { task, agents, budget, scenario, mode }) => {
            if let Some(t) = task {
                cfg.swarm.tasks = parse_tasks(t)?;
            }
            if let Some(a) = agents {
                cfg.swarm.agents = parse_agents(a)?;
            }
            cfg.swarm.budget = budget.unwrap_or(cfg.swarm.budget);
            scenario_path = scenario.clone().or(scenario_path);
            if let Some(m) = mode {
                cfg.swarm.mode = match m {
                    ModeArg::Hardware => "hardware".into(),
                    ModeArg::Reference => "reference".into(),
                };
            }
        }
        Command::Slam(SlamCommand::Run { world, loop_closure, noise }) => {
            world_path = world.clone().or(world_path);
            if let Some(l) = loop_closure {
                cfg.slam.loop_closure = match l {
                    LoopArg::On => LoopMode::On,
                    LoopArg::Off => LoopMode::Off,
                    LoopArg::Both => LoopMode::Both,
                };
            }
            cfg.slam.noise_sigma = noise.or(cfg.slam.noise_sigma);
        }
        _ => {}
    }
    if experiment == Experiment::QnavTrain {
        cfg.qnav.arena = arena_path.as_deref().map(read_text).transpose()?;
    }
    if experiment == Experiment::SwarmRun {
        cfg.swarm.scenario = scenario_path.as_deref().map(read_text).transpose()?;
    }
    if experiment == Experiment::SlamRun {
        cfg.slam.world = world_path.as_deref().map(read_text).transpose()?;
    }
    cfg.validate()?;
    Ok((cfg, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("edgesim").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn bit_ranges() {
        assert_eq!(parse_bits_range("3..8").unwrap(), (3, 8));
        assert_eq!(parse_bits_range("4..=6").unwrap(), (4, 6));
        assert_eq!(parse_bits_range("5").unwrap(), (5, 5));
        assert!(parse_bits_range("x..8").is_err());
    }

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[global]\nseed = \"0x00FF\"\nreplicates = 3\n[mac]\nbits = \"4..6\"\n").unwrap();
        let p = path.to_str().unwrap();
        let (cfg, _) = resolve(&cli(&["--config", p, "mac", "sweep"])).unwrap();
        assert_eq!((cfg.seed, cfg.replicates, cfg.mac.bits_lo, cfg.mac.bits_hi), (0xFF, 3, 4, 6));
        let (cfg, _) = resolve(&cli(&["--config", p, "--seed", "0x10", "mac", "sweep", "--bits", "3..3"])).unwrap();
        assert_eq!((cfg.seed, cfg.replicates, cfg.mac.bits_lo, cfg.mac.bits_hi), (0x10, 3, 3, 3));
        let (cfg, out) = resolve(&cli(&["qnav", "train"])).unwrap();
        assert_eq!((cfg.seed, cfg.replicates, cfg.qnav.episodes), (0xACE1, 1, 300));
        assert_eq!(out, PathBuf::from("out"));
    }

    #[test]
    fn unknown_key_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "[qnav]\nepisodez = 3\n").unwrap();
        let err = resolve(&cli(&["--config", path.to_str().unwrap(), "qnav", "train"])).unwrap_err();
        assert!(format!("{err:#}").contains("episodez"), "{err:#}");
    }

    #[test]
    fn missing_file_names_path() {
        let err = resolve(&cli(&["slam", "run", "--world", "/no/such/world.txt"])).unwrap_err();
        assert!(format!("{err:#}").contains("/no/such/world.txt"));
    }

    #[test]
    fn manifest_config_round_trips_through_toml() {
        let (cfg, _) = resolve(&cli(&["swarm", "run", "--task", "all", "--agents", "2,3"])).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_seed_overflow() {
        assert!(resolve(&cli(&["--seed", "0xFFFF", "--replicates", "2", "qnav", "train"])).is_err());
    }
}
