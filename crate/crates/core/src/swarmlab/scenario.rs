use super::{SwarmConfig, SwarmError, Vec2, Workload};
use crate::stochsyn::Lfsr;
use std::f64::consts::PI;
use std::fmt::Write;

/// Initial layout of a workload. For the grid workloads, coordinates are
/// cell indices and `obstacles` are blocked cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub workload: Workload,
    pub extent: f64,
    pub grid: usize,
    pub agents: Vec<Vec2>,
    /// Goals (path planning) or slots (formation), one per agent.
    pub targets: Vec<Vec2>,
    pub obstacles: Vec<Vec2>,
    pub prey: Option<Vec2>,
}

fn uniform(rng: &mut Lfsr, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_fraction()
}

fn cell(rng: &mut Lfsr, grid: usize) -> Vec2 {
    Vec2::new(rng.next_index(grid) as f64, rng.next_index(grid) as f64)
}

fn manhattan(a: Vec2, b: Vec2) -> f64 {
    (a.x - b.x).abs() + (a.y - b.y).abs()
}

const MAX_TRIES: usize = 10_000;

impl Scenario {
    /// Seeded layout for `cfg`.
    ///
    /// Path planning uses parallel lanes from `x = 2` to `x = extent - 2`
    /// with obstacles kept off the lane centre lines; formation starts agents
    /// at scattered points and targets evenly spaced slots on a circle;
    /// predator-prey starts the prey at least 4 cells from every predator;
    /// exploration starts agents on distinct cells of an empty grid.
    pub fn generate(cfg: &SwarmConfig) -> Result<Scenario, SwarmError> {
        cfg.validate()?;
        let mut rng = Lfsr::from_seed_lossy(cfg.seed as u32);
        let n = cfg.n_agents;
        let e = cfg.extent;
        let mut s = Scenario {
            workload: cfg.workload,
            extent: e,
            grid: cfg.grid,
            agents: Vec::new(),
            targets: Vec::new(),
            obstacles: Vec::new(),
            prey: None,
        };
        let gave_up = || SwarmError::Config("could not place scenario entities".into());
        match cfg.workload {
            Workload::Path => {
                let spacing = e / (n + 1) as f64;
                let lanes: Vec<f64> = (1..=n).map(|i| i as f64 * spacing).collect();
                s.agents = lanes.iter().map(|&y| Vec2::new(2.0, y)).collect();
                s.targets = lanes.iter().map(|&y| Vec2::new(e - 2.0, y)).collect();
                let lateral = 0.45 * spacing.min(1.0);
                let mut tries = 0;
                while s.obstacles.len() < cfg.n_obstacles {
                    tries += 1;
                    if tries > MAX_TRIES {
                        return Err(gave_up());
                    }
                    let p = Vec2::new(uniform(&mut rng, 5.0, e - 5.0), uniform(&mut rng, 1.0, e - 1.0));
                    let off_lanes = lanes.iter().all(|&y| (p.y - y).abs() >= lateral);
                    let spread = s.obstacles.iter().all(|o| (o - p).norm() >= 1.0);
                    if off_lanes && spread {
                        s.obstacles.push(p);
                    }
                }
            }
            Workload::Formation => {
                let c = Vec2::new(e / 2.0, e / 2.0);
                let r = 0.4 * e;
                s.targets = (0..n)
                    .map(|i| {
                        let a = 2.0 * PI * i as f64 / n as f64;
                        c + r * Vec2::new(a.cos(), a.sin())
                    })
                    .collect();
                let mut tries = 0;
                while s.agents.len() < n {
                    tries += 1;
                    if tries > MAX_TRIES {
                        return Err(gave_up());
                    }
                    let p = Vec2::new(uniform(&mut rng, 1.0, e - 1.0), uniform(&mut rng, 1.0, e - 1.0));
                    if s.agents.iter().all(|a| (a - p).norm() >= 1.0) {
                        s.agents.push(p);
                    }
                }
            }
            Workload::PredatorPrey => {
                let mut tries = 0;
                while s.agents.len() < n - 1 {
                    tries += 1;
                    if tries > MAX_TRIES {
                        return Err(gave_up());
                    }
                    let p = cell(&mut rng, cfg.grid);
                    if !s.agents.contains(&p) {
                        s.agents.push(p);
                    }
                }
                loop {
                    tries += 1;
                    if tries > MAX_TRIES {
                        return Err(gave_up());
                    }
                    let p = cell(&mut rng, cfg.grid);
                    if s.agents.iter().all(|&a| manhattan(a, p) >= 4.0) {
                        s.prey = Some(p);
                        break;
                    }
                }
            }
            Workload::Exploration => {
                let mut tries = 0;
                while s.agents.len() < n {
                    tries += 1;
                    if tries > MAX_TRIES {
                        return Err(gave_up());
                    }
                    let p = cell(&mut rng, cfg.grid);
                    if !s.agents.contains(&p) {
                        s.agents.push(p);
                    }
                }
            }
        }
        Ok(s)
    }

    /// Parses `key = value` lines; `agent`, `goal`, `slot`, `obstacle` and
    /// `prey` take two coordinates and may repeat. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Scenario, SwarmError> {
        let mut workload = None;
        let mut s = Scenario {
            workload: Workload::Path,
            extent: 20.0,
            grid: 16,
            agents: Vec::new(),
            targets: Vec::new(),
            obstacles: Vec::new(),
            prey: None,
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| SwarmError::Scenario { line, msg };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let point = || -> Result<Vec2, SwarmError> {
                let v: Vec<f64> = value
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|e| err(format!("{key}: {e}"))))
                    .collect::<Result<_, _>>()?;
                match v[..] {
                    [x, y] if x.is_finite() && y.is_finite() => Ok(Vec2::new(x, y)),
                    _ => Err(err(format!("{key} needs two finite coordinates"))),
                }
            };
            match key {
                "workload" => workload = Some(value.parse::<Workload>().map_err(|e| err(e.to_string()))?),
                "extent" => s.extent = value.parse().map_err(|e| err(format!("extent: {e}")))?,
                "grid" => s.grid = value.parse().map_err(|e| err(format!("grid: {e}")))?,
                "agent" => s.agents.push(point()?),
                "goal" | "slot" => s.targets.push(point()?),
                "obstacle" => s.obstacles.push(point()?),
                "prey" => s.prey = Some(point()?),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        s.workload = workload.ok_or(SwarmError::Scenario { line: 0, msg: "missing `workload`".into() })?;
        Ok(s)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "workload = {}", self.workload);
        let _ = writeln!(out, "extent = {}", self.extent);
        let _ = writeln!(out, "grid = {}", self.grid);
        let target_key = if self.workload == Workload::Formation { "slot" } else { "goal" };
        for a in &self.agents {
            let _ = writeln!(out, "agent = {} {}", a.x, a.y);
        }
        for t in &self.targets {
            let _ = writeln!(out, "{target_key} = {} {}", t.x, t.y);
        }
        for o in &self.obstacles {
            let _ = writeln!(out, "obstacle = {} {}", o.x, o.y);
        }
        if let Some(p) = self.prey {
            let _ = writeln!(out, "prey = {} {}", p.x, p.y);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        for w in Workload::ALL {
            let cfg = SwarmConfig::new(w, 5, 0xACE1);
            let s = Scenario::generate(&cfg).unwrap();
            assert_eq!(Scenario::parse(&s.to_text()).unwrap(), s, "{w}");
        }
    }

    #[test]
    fn generation_is_seeded() {
        let cfg = SwarmConfig::new(Workload::Path, 6, 42);
        assert_eq!(Scenario::generate(&cfg).unwrap(), Scenario::generate(&cfg).unwrap());
        let other = SwarmConfig { seed: 43, ..cfg };
        assert_ne!(Scenario::generate(&cfg).unwrap().obstacles, Scenario::generate(&other).unwrap().obstacles);
    }

    #[test]
    fn parse_errors() {
        assert!(Scenario::parse("agent = 1 2\n").is_err());
        assert!(Scenario::parse("workload = path\nagent = 1\n").is_err());
        assert!(Scenario::parse("workload = path\ncolour = red\n").is_err());
        assert!(Scenario::parse("workload = flock\n").is_err());
        let s = Scenario::parse("workload = path # comment\n\nagent = 1 2\ngoal = 3 4\n").unwrap();
        assert_eq!(s.agents, vec![Vec2::new(1.0, 2.0)]);
    }
}
