//! Swarm compute paradigm.
//!
//! A nonlinear function evaluator (chord tables with folding) and a linear
//! processing unit built on HD-MS MACs carry all value arithmetic of four
//! workloads: APF path planning, circle formation, gridworld predator-prey
//! and shared-map joint exploration. Precision follows swarm size.

mod apf;
mod field;
mod grid;
mod lpu;
mod nfe;
mod scenario;

pub use apf::{apf_force, apf_force_hw, PotentialParams, Vec2};
pub use lpu::{lpu_dot, Lpu};
pub use nfe::{
    nfe_apply, nfe_build, nfe_eval, nfe_fold, FoldTags, NfeFunction, NfeTable, Symmetry, DEFAULT_SEGMENTS,
};
pub use scenario::Scenario;

use crate::macmodel::{BitWidth, EnergyParams, MacError};
use field::FieldWorld;
use grid::{ChaseWorld, ExploreWorld};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwarmError {
    #[error("swarm size {0} outside [2, 20]")]
    SwarmSize(usize),
    #[error("NFE: {0}")]
    Nfe(String),
    #[error("vector lengths differ ({x} vs {w})")]
    Length { x: usize, w: usize },
    #[error("agent coincides with an obstacle")]
    Singular,
    #[error("unknown workload `{0}`")]
    UnknownWorkload(String),
    #[error("world is a {world} state but the config asks for {config}")]
    WorkloadMismatch { world: Workload, config: Workload },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("scenario line {line}: {msg}")]
    Scenario { line: usize, msg: String },
    #[error(transparent)]
    Mac(#[from] MacError),
}

/// Linear map from swarm size to bit width: 2 agents use 3 bits, 20 use 8.
pub fn bitwidth_for_swarm(n: usize) -> Result<BitWidth, SwarmError> {
    if !(2..=20).contains(&n) {
        return Err(SwarmError::SwarmSize(n));
    }
    let b = (3.0 + 5.0 * (n - 2) as f64 / 18.0).round() as u8;
    Ok(BitWidth::new(b)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Workload {
    Path,
    Formation,
    PredatorPrey,
    Exploration,
}

impl Workload {
    pub const ALL: [Workload; 4] = [Workload::Path, Workload::Formation, Workload::PredatorPrey, Workload::Exploration];

    pub fn name(self) -> &'static str {
        match self {
            Workload::Path => "path",
            Workload::Formation => "formation",
            Workload::PredatorPrey => "predprey",
            Workload::Exploration => "explore",
        }
    }
}

impl fmt::Display for Workload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Workload {
    type Err = SwarmError;
    fn from_str(s: &str) -> Result<Self, SwarmError> {
        Self::ALL.into_iter().find(|w| w.name() == s).ok_or_else(|| SwarmError::UnknownWorkload(s.to_string()))
    }
}

/// Quantized, energy-metered arithmetic or exact reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ComputeMode {
    #[default]
    Hardware,
    Reference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmConfig {
    pub n_agents: usize,
    pub workload: Workload,
    /// Side of the square continuous arena.
    pub extent: f64,
    /// Side of the square grid for the grid workloads.
    pub grid: usize,
    pub seed: u16,
    pub mode: ComputeMode,
    pub potential: PotentialParams,
    pub nfe_segments: usize,
    pub collision_radius: f64,
    pub goal_tolerance: f64,
    pub slot_tolerance: f64,
    pub n_obstacles: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// Predators move uniformly at random instead of learning.
    pub random_predators: bool,
    pub coverage_target: f64,
    pub stop_on_success: bool,
}

impl SwarmConfig {
    pub fn new(workload: Workload, n_agents: usize, seed: u16) -> Self {
        let grid = match workload {
            Workload::PredatorPrey => 10,
            _ => 16,
        };
        let (alpha, gamma) = match workload {
            Workload::Exploration => (0.1, 0.5),
            _ => (0.5, 0.9),
        };
        Self {
            n_agents,
            workload,
            extent: 20.0,
            grid,
            seed,
            mode: ComputeMode::Hardware,
            potential: PotentialParams::default(),
            nfe_segments: DEFAULT_SEGMENTS,
            collision_radius: 0.15,
            goal_tolerance: 0.05,
            slot_tolerance: 0.1,
            n_obstacles: 8,
            epsilon: 0.1,
            alpha,
            gamma,
            random_predators: false,
            coverage_target: 0.9,
            stop_on_success: true,
        }
    }

    pub fn validate(&self) -> Result<(), SwarmError> {
        bitwidth_for_swarm(self.n_agents)?;
        self.potential.validate()?;
        let bad = |m: &str| Err(SwarmError::Config(m.to_string()));
        if !(self.extent.is_finite() && self.extent >= 6.0) {
            return bad("extent must be at least 6");
        }
        if self.grid < 4 || self.grid > 256 {
            return bad("grid side must be in [4, 256]");
        }
        if self.workload == Workload::PredatorPrey && self.grid * self.grid < self.n_agents + 1 {
            return bad("grid too small for the swarm");
        }
        if !(self.collision_radius > 0.0 && self.goal_tolerance > 0.0 && self.slot_tolerance > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon) || !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("epsilon must be in [0, 1] and alpha in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must be in [0, 1)");
        }
        if !(self.coverage_target > 0.0 && self.coverage_target <= 1.0) {
            return bad("coverage target must be in (0, 1]");
        }
        if self.nfe_segments < 2 {
            return bad("NFE needs at least 2 segments");
        }
        Ok(())
    }

    pub fn bits(&self) -> Result<BitWidth, SwarmError> {
        bitwidth_for_swarm(self.n_agents)
    }
}

/// Arithmetic backend shared by the workloads.
#[derive(Debug, Clone)]
pub(crate) struct Arith {
    mode: ComputeMode,
    lpu: Lpu,
}

impl Arith {
    pub(crate) fn new(mode: ComputeMode, bits: BitWidth, params: EnergyParams) -> Self {
        Self { mode, lpu: Lpu::new(bits, params) }
    }

    pub(crate) fn dot(&mut self, x: &[f64], x_range: f64, w: &[f64], w_range: f64) -> Result<f64, SwarmError> {
        match self.mode {
            ComputeMode::Hardware => self.lpu.dot_real(x, x_range, w, w_range),
            ComputeMode::Reference => {
                if x.len() != w.len() {
                    return Err(SwarmError::Length { x: x.len(), w: w.len() });
                }
                Ok(x.iter().zip(w).map(|(a, b)| a * b).sum())
            }
        }
    }

    /// Value as held in `b`-bit storage over `[-range, range]`.
    pub(crate) fn store(&self, v: f64, range: f64) -> Result<f64, SwarmError> {
        match self.mode {
            ComputeMode::Hardware => {
                let b = self.lpu.bits();
                Ok(crate::macmodel::dequantize(crate::macmodel::quantize(v, b, range)?, b, range))
            }
            ComputeMode::Reference => Ok(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepMetrics {
    pub energy_pj: f64,
    pub macs: u64,
    pub actions: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum World {
    Field(FieldWorld),
    Chase(ChaseWorld),
    Explore(ExploreWorld),
}

impl World {
    pub fn from_scenario(cfg: &SwarmConfig, scenario: &Scenario) -> Result<World, SwarmError> {
        cfg.validate()?;
        if scenario.workload != cfg.workload {
            return Err(SwarmError::WorkloadMismatch { world: scenario.workload, config: cfg.workload });
        }
        Ok(match cfg.workload {
            Workload::Path | Workload::Formation => World::Field(FieldWorld::new(cfg, scenario)?),
            Workload::PredatorPrey => World::Chase(ChaseWorld::new(cfg, scenario)?),
            Workload::Exploration => World::Explore(ExploreWorld::new(cfg, scenario)?),
        })
    }

    pub fn workload(&self) -> Workload {
        match self {
            World::Field(w) => w.workload,
            World::Chase(_) => Workload::PredatorPrey,
            World::Explore(_) => Workload::Exploration,
        }
    }

    /// Agent positions (grid cells as integer coordinates).
    pub fn positions(&self) -> Vec<Vec2> {
        match self {
            World::Field(w) => w.positions.clone(),
            World::Chase(w) => w.predators.iter().map(|&(x, y)| Vec2::new(x as f64, y as f64)).collect(),
            World::Explore(w) => w.agents.iter().map(|&(x, y)| Vec2::new(x as f64, y as f64)).collect(),
        }
    }

    pub fn success(&self, cfg: &SwarmConfig) -> bool {
        match self {
            World::Field(w) => w.success(cfg),
            World::Chase(w) => w.caught,
            World::Explore(w) => w.coverage() >= cfg.coverage_target,
        }
    }

    /// Closest approach of any agent to an obstacle or another agent, for
    /// the continuous workloads.
    pub fn min_clearance(&self) -> Option<f64> {
        match self {
            World::Field(w) => Some(w.min_clearance),
            _ => None,
        }
    }

    /// Path: worst goal distance. Formation: mean slot error. Predator-prey:
    /// 1 if caught. Exploration: covered fraction.
    pub fn score(&self) -> f64 {
        match self {
            World::Field(w) => w.score(),
            World::Chase(w) => w.caught as u8 as f64,
            World::Explore(w) => w.coverage(),
        }
    }
}

/// Advances every agent once, synchronously from the previous state.
pub fn workload_step(world: &World, cfg: &SwarmConfig, params: &EnergyParams) -> Result<(World, StepMetrics), SwarmError> {
    if world.workload() != cfg.workload {
        return Err(SwarmError::WorkloadMismatch { world: world.workload(), config: cfg.workload });
    }
    let mut arith = Arith::new(cfg.mode, cfg.bits()?, *params);
    let (next, actions) = match world {
        World::Field(w) => {
            let (n, a) = w.step(cfg, &mut arith)?;
            (World::Field(n), a)
        }
        World::Chase(w) => {
            let (n, a) = w.step(cfg, &mut arith)?;
            (World::Chase(n), a)
        }
        World::Explore(w) => {
            let (n, a) = w.step(cfg, &mut arith)?;
            (World::Explore(n), a)
        }
    };
    Ok((next, StepMetrics { energy_pj: arith.lpu.energy_pj(), macs: arith.lpu.macs(), actions }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadMetrics {
    pub workload: Workload,
    pub n_agents: usize,
    pub bits: u8,
    pub steps: u64,
    pub actions_per_agent: f64,
    pub energy_pj: f64,
    pub macs: u64,
    pub success: bool,
    pub score: f64,
}

impl WorkloadMetrics {
    pub const CSV_HEADER: &'static str = "workload,n_agents,bits,steps,actions,energy_pj,success,score";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.workload, self.n_agents, self.bits, self.steps, self.actions_per_agent, self.energy_pj, self.success, self.score
        )
    }
}

/// Generates the seeded scenario for `cfg` and runs it.
pub fn run_workload(cfg: &SwarmConfig, params: &EnergyParams, budget: u64) -> Result<WorkloadMetrics, SwarmError> {
    let scenario = Scenario::generate(cfg)?;
    run_scenario(cfg, &scenario, params, budget)
}

/// Steps until the success criterion holds (when `stop_on_success`) or the
/// budget runs out. For predator-prey the score is the step count at capture,
/// or the budget when the prey escapes.
pub fn run_scenario(cfg: &SwarmConfig, scenario: &Scenario, params: &EnergyParams, budget: u64) -> Result<WorkloadMetrics, SwarmError> {
    let mut world = World::from_scenario(cfg, scenario)?;
    let agents = world.positions().len().max(1);
    let mut steps = 0u64;
    let mut total = StepMetrics::default();
    while steps < budget && !(cfg.stop_on_success && world.success(cfg)) {
        let (next, m) = workload_step(&world, cfg, params)?;
        world = next;
        steps += 1;
        total.energy_pj += m.energy_pj;
        total.macs += m.macs;
        total.actions += m.actions;
    }
    let success = world.success(cfg);
    let score = match &world {
        World::Chase(w) => w.caught_at.unwrap_or(budget) as f64,
        _ => world.score(),
    };
    Ok(WorkloadMetrics {
        workload: cfg.workload,
        n_agents: cfg.n_agents,
        bits: cfg.bits()?.bits(),
        steps,
        actions_per_agent: total.actions as f64 / agents as f64,
        energy_pj: total.energy_pj,
        macs: total.macs,
        success,
        score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitwidth_map() {
        let bits = |n| bitwidth_for_swarm(n).unwrap().bits();
        assert_eq!(bits(2), 3);
        assert_eq!(bits(20), 8);
        assert_eq!(bits(11), 6);
        for n in 2..20 {
            assert!(bits(n) <= bits(n + 1));
        }
        assert!(bitwidth_for_swarm(1).is_err());
        assert!(bitwidth_for_swarm(21).is_err());
    }

    #[test]
    fn workload_names() {
        for w in Workload::ALL {
            assert_eq!(w.name().parse::<Workload>().unwrap(), w);
        }
        assert!(matches!("flock".parse::<Workload>(), Err(SwarmError::UnknownWorkload(_))));
    }

    #[test]
    fn mismatched_world_rejected() {
        let cfg = SwarmConfig::new(Workload::Path, 2, 1);
        let world = World::from_scenario(&cfg, &Scenario::generate(&cfg).unwrap()).unwrap();
        let other = SwarmConfig::new(Workload::Formation, 2, 1);
        assert!(matches!(
            workload_step(&world, &other, &EnergyParams::default()),
            Err(SwarmError::WorkloadMismatch { .. })
        ));
    }

    #[test]
    fn csv_row_has_header_arity() {
        let cfg = SwarmConfig { stop_on_success: false, ..SwarmConfig::new(Workload::PredatorPrey, 3, 7) };
        let m = run_workload(&cfg, &EnergyParams::default(), 5).unwrap();
        assert_eq!(m.csv_row().split(',').count(), WorkloadMetrics::CSV_HEADER.split(',').count());
        assert!(m.csv_row().starts_with("predprey,3,3,5,"));
    }
}
