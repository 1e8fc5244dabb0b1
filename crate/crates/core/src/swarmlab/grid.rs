//! Gridworld workloads: predator-prey and joint exploration.

use super::{Arith, Scenario, SwarmConfig, SwarmError};
use crate::stochsyn::Lfsr;

type Pos = (i32, i32);

/// North, south, east, west; `y` grows downward.
const MOVES: [Pos; 4] = [(0, -1), (0, 1), (1, 0), (-1, 0)];

fn to_cells(points: &[super::Vec2], grid: usize, what: &str) -> Result<Vec<Pos>, SwarmError> {
    points
        .iter()
        .map(|p| {
            let (x, y) = (p.x.round() as i32, p.y.round() as i32);
            if x < 0 || y < 0 || x as usize >= grid || y as usize >= grid {
                Err(SwarmError::Config(format!("{what} ({}, {}) outside the {grid}x{grid} grid", p.x, p.y)))
            } else {
                Ok((x, y))
            }
        })
        .collect()
}

fn manhattan(a: Pos, b: Pos) -> i32 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs()
}

fn inside(p: Pos, grid: usize) -> bool {
    p.0 >= 0 && p.1 >= 0 && (p.0 as usize) < grid && (p.1 as usize) < grid
}

/// ε-greedy choice; ties among maximal values are broken uniformly.
fn epsilon_greedy(values: &[f64], epsilon: f64, rng: &mut Lfsr) -> usize {
    if rng.next_fraction() < epsilon {
        return rng.next_index(values.len());
    }
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.next_index(ties.len())]
    }
}

/// Relative offsets are clipped to ±3 cells per axis.
const VIEW: i32 = 3;
const SIDE: usize = (2 * VIEW + 1) as usize;
const Q_RANGE: f64 = 4.0;
const CATCH_BONUS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ChaseWorld {
    pub grid: usize,
    pub predators: Vec<Pos>,
    pub prey: Pos,
    pub caught: bool,
    pub caught_at: Option<u64>,
    pub step: u64,
    /// Q-values over (relative prey offset, move), row-major by state.
    pub q: Vec<f64>,
    rng: Lfsr,
}

fn chase_state(pred: Pos, prey: Pos) -> usize {
    let dx = (prey.0 - pred.0).clamp(-VIEW, VIEW) + VIEW;
    let dy = (prey.1 - pred.1).clamp(-VIEW, VIEW) + VIEW;
    dx as usize * SIDE + dy as usize
}

impl ChaseWorld {
    pub(crate) fn new(cfg: &SwarmConfig, s: &Scenario) -> Result<Self, SwarmError> {
        let predators = to_cells(&s.agents, s.grid, "predator")?;
        if predators.len() + 1 != cfg.n_agents {
            return Err(SwarmError::Config(format!(
                "{} predators plus one prey does not match {} agents",
                predators.len(),
                cfg.n_agents
            )));
        }
        let prey = s.prey.ok_or_else(|| SwarmError::Config("predator-prey scenario needs a prey".into()))?;
        let prey = to_cells(&[prey], s.grid, "prey")?[0];
        let caught = predators.contains(&prey);
        Ok(ChaseWorld {
            grid: s.grid,
            predators,
            prey,
            caught,
            caught_at: caught.then_some(0),
            step: 0,
            q: vec![0.0; SIDE * SIDE * MOVES.len()],
            rng: Lfsr::from_seed_lossy(cfg.seed as u32 ^ 0x5A5A_0000),
        })
    }

    fn clamp_move(&self, p: Pos, m: Pos) -> Pos {
        let t = (p.0 + m.0, p.1 + m.1);
        if inside(t, self.grid) {
            t
        } else {
            p
        }
    }

    /// Predators move every step; the prey moves on odd steps to the
    /// neighbouring cell (or stays) that maximizes its distance to the nearest
    /// predator. Learning predators update a shared Q-table through the LPU.
    pub(crate) fn step(&self, cfg: &SwarmConfig, arith: &mut Arith) -> Result<(ChaseWorld, u64), SwarmError> {
        let mut next = self.clone();
        if self.caught {
            return Ok((next, 0));
        }
        let mut choices = Vec::with_capacity(self.predators.len());
        for &pred in &self.predators {
            let s = chase_state(pred, self.prey);
            let a = if cfg.random_predators {
                next.rng.next_index(MOVES.len())
            } else {
                epsilon_greedy(&self.q[s * 4..s * 4 + 4], cfg.epsilon, &mut next.rng)
            };
            choices.push((s, a));
        }
        next.predators = self.predators.iter().zip(&choices).map(|(&p, &(_, a))| self.clamp_move(p, MOVES[a])).collect();
        next.step = self.step + 1;
        next.caught = next.predators.contains(&self.prey);
        if !next.caught && self.step % 2 == 1 {
            let nearest = |c: Pos| next.predators.iter().map(|&p| manhattan(p, c)).min().unwrap_or(i32::MAX);
            let mut best = (nearest(self.prey), self.prey);
            for m in MOVES {
                let c = self.clamp_move(self.prey, m);
                let d = nearest(c);
                if d > best.0 {
                    best = (d, c);
                }
            }
            next.prey = best.1;
        }
        if next.caught {
            next.caught_at = Some(next.step);
        }
        if !cfg.random_predators {
            let keep = arith.store(1.0 - cfg.alpha, 1.0)?;
            let rate = arith.store(cfg.alpha, 1.0)?;
            let mut updates = Vec::with_capacity(choices.len());
            for (k, &(s, a)) in choices.iter().enumerate() {
                let (old, new) = (self.predators[k], next.predators[k]);
                let mut reward = (manhattan(old, self.prey) - manhattan(new, self.prey)) as f64;
                let target = if next.caught && new == self.prey {
                    reward += CATCH_BONUS;
                    reward
                } else {
                    let s2 = chase_state(new, next.prey);
                    let best = self.q[s2 * 4..s2 * 4 + 4].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    reward + cfg.gamma * best
                };
                let target = arith.store(target, Q_RANGE)?;
                let v = arith.dot(&[keep, rate], 1.0, &[self.q[s * 4 + a], target], Q_RANGE)?;
                updates.push((s * 4 + a, arith.store(v, Q_RANGE)?));
            }
            for (i, v) in updates {
                next.q[i] = v;
            }
        }
        Ok((next, self.predators.len() as u64))
    }
}

/// Weight storage range of the exploration value function.
const W_RANGE: f64 = 2.0;
const STEP_RANGE: f64 = 0.5;
const REWARD_NEW: f64 = 1.0;
const REWARD_BLOCKED: f64 = -1.0;
const N_FEATURES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ExploreWorld {
    pub grid: usize,
    pub blocked: Vec<bool>,
    pub visited: Vec<bool>,
    pub agents: Vec<Pos>,
    /// Shared linear value weights over (unvisited target, unvisited
    /// fraction around the target, target blocked).
    pub weights: [f64; N_FEATURES],
    rng: Lfsr,
}

impl ExploreWorld {
    pub(crate) fn new(cfg: &SwarmConfig, s: &Scenario) -> Result<Self, SwarmError> {
        let agents = to_cells(&s.agents, s.grid, "agent")?;
        // fewer agents than the configured swarm size is allowed, so that a
        // lone explorer can run at the precision of a larger swarm
        if agents.is_empty() || agents.len() > cfg.n_agents {
            return Err(SwarmError::Config(format!("scenario has {} agents, config allows 1 to {}", agents.len(), cfg.n_agents)));
        }
        let mut blocked = vec![false; s.grid * s.grid];
        for c in to_cells(&s.obstacles, s.grid, "obstacle")? {
            blocked[c.1 as usize * s.grid + c.0 as usize] = true;
        }
        let mut w = ExploreWorld {
            grid: s.grid,
            blocked,
            visited: vec![false; s.grid * s.grid],
            agents,
            weights: [0.0; N_FEATURES],
            rng: Lfsr::from_seed_lossy(cfg.seed as u32 ^ 0x3C3C_0000),
        };
        for &a in &w.agents.clone() {
            if w.is_blocked(a) {
                return Err(SwarmError::Config(format!("agent starts on blocked cell {a:?}")));
            }
            let i = w.index(a);
            w.visited[i] = true;
        }
        Ok(w)
    }

    fn index(&self, p: Pos) -> usize {
        p.1 as usize * self.grid + p.0 as usize
    }

    fn is_blocked(&self, p: Pos) -> bool {
        !inside(p, self.grid) || self.blocked[self.index(p)]
    }

    pub fn free_cells(&self) -> usize {
        self.blocked.iter().filter(|b| !**b).count()
    }

    pub fn coverage(&self) -> f64 {
        self.visited.iter().filter(|v| **v).count() as f64 / self.free_cells().max(1) as f64
    }

    fn features(&self, target: Pos) -> [f64; N_FEATURES] {
        if self.is_blocked(target) {
            return [0.0, 0.0, 1.0];
        }
        let (mut free, mut new) = (0, 0);
        for dy in -2..=2 {
            for dx in -2..=2 {
                let c = (target.0 + dx, target.1 + dy);
                if !self.is_blocked(c) {
                    free += 1;
                    new += !self.visited[self.index(c)] as i32;
                }
            }
        }
        [!self.visited[self.index(target)] as u8 as f64, new as f64 / free as f64, 0.0]
    }

    fn values(&self, pos: Pos, arith: &mut Arith) -> Result<([f64; 4], [[f64; N_FEATURES]; 4]), SwarmError> {
        let mut q = [0.0; 4];
        let mut phi = [[0.0; N_FEATURES]; 4];
        for (k, m) in MOVES.iter().enumerate() {
            phi[k] = self.features((pos.0 + m.0, pos.1 + m.1));
            q[k] = arith.dot(&phi[k], 1.0, &self.weights, W_RANGE)?;
        }
        Ok((q, phi))
    }

    /// Each agent picks a move by ε-greedy linear Q over local occupancy
    /// features, all agents deciding from the same pre-step map. The shared
    /// weights move by α·δ·φ, each product formed on the LPU.
    pub(crate) fn step(&self, cfg: &SwarmConfig, arith: &mut Arith) -> Result<(ExploreWorld, u64), SwarmError> {
        let mut next = self.clone();
        let mut delta = [0.0; N_FEATURES];
        for (k, &pos) in self.agents.iter().enumerate() {
            let (q, phi) = self.values(pos, arith)?;
            let a = epsilon_greedy(&q, cfg.epsilon, &mut next.rng);
            let target = (pos.0 + MOVES[a].0, pos.1 + MOVES[a].1);
            let (new_pos, reward) = if self.is_blocked(target) {
                (pos, REWARD_BLOCKED)
            } else if !self.visited[self.index(target)] {
                (target, REWARD_NEW)
            } else {
                (target, 0.0)
            };
            let (q2, _) = self.values(new_pos, arith)?;
            let best = q2.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let td = arith.store(cfg.alpha * (reward + cfg.gamma * best - q[a]), STEP_RANGE)?;
            for j in 0..N_FEATURES {
                delta[j] += arith.dot(&[td], STEP_RANGE, &[phi[a][j]], 1.0)?;
            }
            next.agents[k] = new_pos;
        }
        for &p in &next.agents {
            let i = next.index(p);
            next.visited[i] = true;
        }
        for j in 0..N_FEATURES {
            next.weights[j] = (self.weights[j] + delta[j]).clamp(-W_RANGE, W_RANGE);
        }
        Ok((next, self.agents.len() as u64))
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::macmodel::EnergyParams;

    #[test]
    fn chase_state_clips() {
        assert_eq!(super::chase_state((0, 0), (0, 0)), 3 * 7 + 3);
        assert_eq!(super::chase_state((0, 0), (9, -9)), 6 * 7);
    }

    #[test]
    fn prey_flees_and_is_caught_by_learner() {
        let p = EnergyParams::default();
        let cfg = SwarmConfig::new(Workload::PredatorPrey, 2, 3);
        let r = run_workload(&cfg, &p, 500).unwrap();
        assert!(r.success, "{r:?}");
        assert!(r.energy_pj > 0.0);
        let rnd = run_workload(&SwarmConfig { random_predators: true, ..cfg }, &p, 500).unwrap();
        assert_eq!(rnd.energy_pj, 0.0);
    }

    #[test]
    fn exploration_two_agents_beat_one() {
        let p = EnergyParams::default();
        let base = SwarmConfig { grid: 8, stop_on_success: false, ..SwarmConfig::new(Workload::Exploration, 2, 0xACE1) };
        let mut lone = Scenario::generate(&base).unwrap();
        lone.agents.truncate(1);
        // within 500 steps a single explorer already saturates an 8x8 grid, so
        // the strict comparison is made early in the run
        for (steps, strict) in [(50, true), (500, false)] {
            let two = run_workload(&base, &p, steps).unwrap();
            let one = run_scenario(&base, &lone, &p, steps).unwrap();
            assert_eq!(one.steps, steps);
            if strict {
                assert!(two.score > one.score, "{steps}: {} vs {}", two.score, one.score);
            } else {
                assert!(two.score >= one.score, "{steps}: {} vs {}", two.score, one.score);
            }
        }
    }
}
