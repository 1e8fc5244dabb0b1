//! Potential-field workloads: path planning and formation.

use super::apf::{apf_force, apf_force_hw};
use super::nfe::{NfeFunction, NfeTable};
use super::{Arith, ComputeMode, Scenario, SwarmConfig, SwarmError, Vec2, Workload};

#[derive(Debug, Clone, PartialEq)]
pub struct FieldWorld {
    pub workload: Workload,
    pub positions: Vec<Vec2>,
    pub targets: Vec<Vec2>,
    pub obstacles: Vec<Vec2>,
    pub collided: bool,
    /// Smallest agent-obstacle or agent-agent distance seen so far.
    pub min_clearance: f64,
    recip: NfeTable,
}

impl FieldWorld {
    pub(crate) fn new(cfg: &SwarmConfig, s: &Scenario) -> Result<Self, SwarmError> {
        if s.agents.len() != cfg.n_agents || s.targets.len() != cfg.n_agents {
            return Err(SwarmError::Config(format!(
                "scenario has {} agents and {} targets, config expects {}",
                s.agents.len(),
                s.targets.len(),
                cfg.n_agents
            )));
        }
        let recip = nfe_recip(cfg)?;
        let mut w = FieldWorld {
            workload: cfg.workload,
            positions: s.agents.clone(),
            targets: s.targets.clone(),
            obstacles: s.obstacles.clone(),
            collided: false,
            min_clearance: f64::INFINITY,
            recip,
        };
        w.check_collisions(cfg.collision_radius);
        Ok(w)
    }

    fn check_collisions(&mut self, radius: f64) {
        for (i, p) in self.positions.iter().enumerate() {
            let obs = self.obstacles.iter().map(|o| (p - o).norm());
            let agents = self.positions.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| (p - q).norm());
            for d in obs.chain(agents) {
                self.min_clearance = self.min_clearance.min(d);
                if d < radius {
                    self.collided = true;
                }
            }
        }
    }

    /// Moves every agent by its field force. The goal seen by the field is
    /// clipped to `v_max / k_att` from the agent, so attraction never exceeds
    /// the step clamp and repulsion can dominate it near obstacles.
    pub(crate) fn step(&self, cfg: &SwarmConfig, arith: &mut Arith) -> Result<(FieldWorld, u64), SwarmError> {
        let p = &cfg.potential;
        let reach = p.v_max / p.k_att;
        let mut next = self.clone();
        let mut actions = 0;
        for (i, &pos) in self.positions.iter().enumerate() {
            let to_goal = self.targets[i] - pos;
            let d = to_goal.norm();
            let carrot = if d > reach { pos + to_goal * (reach / d) } else { self.targets[i] };
            let mut others: Vec<Vec2> = self.obstacles.clone();
            others.extend(self.positions.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| *q));
            let f = match arith.mode {
                ComputeMode::Hardware => apf_force_hw(pos, carrot, &others, p, &self.recip, &mut arith.lpu)?,
                ComputeMode::Reference => apf_force(pos, carrot, &others, p)?,
            };
            if f != Vec2::zeros() {
                actions += 1;
            }
            next.positions[i] = pos + f;
        }
        next.check_collisions(cfg.collision_radius);
        Ok((next, actions))
    }

    pub fn errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.positions.iter().zip(&self.targets).map(|(p, t)| (p - t).norm())
    }

    pub(crate) fn success(&self, cfg: &SwarmConfig) -> bool {
        match self.workload {
            Workload::Formation => self.score() < cfg.slot_tolerance,
            _ => !self.collided && self.errors().all(|e| e <= cfg.goal_tolerance),
        }
    }

    pub(crate) fn score(&self) -> f64 {
        let n = self.positions.len() as f64;
        match self.workload {
            Workload::Formation => self.errors().sum::<f64>() / n,
            _ => self.errors().fold(0.0, f64::max),
        }
    }
}

/// Reciprocal table spanning the repulsion radius.
fn nfe_recip(cfg: &SwarmConfig) -> Result<NfeTable, SwarmError> {
    let hi = cfg.potential.d0.max(0.1);
    let lo = (cfg.collision_radius / 4.0).min(hi / 2.0);
    let table = super::nfe_build(NfeFunction::Recip, (lo, hi), cfg.nfe_segments)?;
    Ok(table.with_tags(NfeTable::standard(NfeFunction::Recip, 2)?.tags()))
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::macmodel::EnergyParams;

    #[test]
    fn agents_at_goals_stay_put() {
        let cfg = SwarmConfig::new(Workload::Path, 3, 5);
        let mut s = Scenario::generate(&cfg).unwrap();
        s.agents = s.targets.clone();
        let world = World::from_scenario(&cfg, &s).unwrap();
        let (next, m) = workload_step(&world, &cfg, &EnergyParams::default()).unwrap();
        assert_eq!(next.positions(), world.positions());
        assert_eq!(m.actions, 0);
        let r = run_scenario(&cfg, &s, &EnergyParams::default(), 100).unwrap();
        assert_eq!((r.steps, r.success), (0, true));
    }

    #[test]
    fn formation_slots_are_fixed_point() {
        for mode in [ComputeMode::Hardware, ComputeMode::Reference] {
            let cfg = SwarmConfig { mode, ..SwarmConfig::new(Workload::Formation, 20, 9) };
            let mut s = Scenario::generate(&cfg).unwrap();
            s.agents = s.targets.clone();
            let world = World::from_scenario(&cfg, &s).unwrap();
            let (next, _) = workload_step(&world, &cfg, &EnergyParams::default()).unwrap();
            assert_eq!(next.positions(), world.positions());
        }
    }

    #[test]
    fn energy_is_sum_of_steps() {
        let cfg = SwarmConfig { stop_on_success: false, ..SwarmConfig::new(Workload::Path, 4, 11) };
        let p = EnergyParams::default();
        let s = Scenario::generate(&cfg).unwrap();
        let mut w = World::from_scenario(&cfg, &s).unwrap();
        let mut sum = 0.0;
        for _ in 0..20 {
            let (n, m) = workload_step(&w, &cfg, &p).unwrap();
            sum += m.energy_pj;
            w = n;
        }
        let r = run_scenario(&cfg, &s, &p, 20).unwrap();
        assert_eq!(r.energy_pj, sum);
        assert!(sum > 0.0);
    }
}
