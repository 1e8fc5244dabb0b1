use super::arena::{apply_action, sense, Action, Arena, Cell, DepthReading};
use super::network::{argmax, Hardware, MaskPair, QNetwork};
use super::QnavError;
use crate::stochsyn::{Lfsr, DEFAULT_DROP_P};
use std::collections::{HashSet, VecDeque};

/// One scratchpad record `(s, a, r, s')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experience {
    pub s: DepthReading,
    pub a: usize,
    pub r: f64,
    pub s_next: DepthReading,
    pub terminal: bool,
}

impl Experience {
    pub fn new(s: DepthReading, a: usize, r: f64, s_next: DepthReading, terminal: bool) -> Result<Self, QnavError> {
        if a >= Action::COUNT {
            return Err(QnavError::Config(format!("action index {a} out of range")));
        }
        if !r.is_finite() {
            return Err(QnavError::Config(format!("reward {r} is not finite")));
        }
        Ok(Self { s, a, r, s_next, terminal })
    }
}

/// Bounded replay memory that evicts the oldest record first.
#[derive(Debug, Clone)]
pub struct Scratchpad {
    capacity: usize,
    records: VecDeque<Experience>,
}

impl Scratchpad {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, records: VecDeque::with_capacity(capacity) }
    }

    pub fn push(&mut self, e: Experience) {
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(e);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&Experience> {
        self.records.get(i)
    }

    /// `n` records drawn uniformly with replacement.
    pub fn sample(&self, n: usize, rng: &mut Lfsr) -> Vec<Experience> {
        (0..n).map(|_| self.records[rng.next_index(self.records.len())]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Episodes over which ε decays linearly from start to end.
    pub epsilon_decay_episodes: usize,
    pub capacity: usize,
    pub batch_size: usize,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub drop_p: f64,
    pub stochastic: bool,
    /// Convergence when the windowed mean coverage reaches this fraction of
    /// free cells.
    pub convergence_fraction: f64,
    pub convergence_window: usize,
    pub stop_at_convergence: bool,
    /// Initial latent weights are uniform in ±`init_range`·weight range.
    pub init_range: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            gamma: 0.8,
            epsilon_start: 0.2,
            epsilon_end: 0.02,
            epsilon_decay_episodes: 20,
            capacity: 256,
            batch_size: 8,
            episodes: 300,
            steps_per_episode: 200,
            drop_p: DEFAULT_DROP_P,
            stochastic: false,
            convergence_fraction: 0.7,
            convergence_window: 10,
            stop_at_convergence: true,
            init_range: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), QnavError> {
        let bad = |m: &str| Err(QnavError::Config(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must be in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must be in [0, 1)");
        }
        for e in [self.epsilon_start, self.epsilon_end] {
            if !(0.0..=1.0).contains(&e) {
                return bad("epsilon must be in [0, 1]");
            }
        }
        if self.batch_size == 0 || self.capacity < self.batch_size {
            return bad("capacity must be >= batch size >= 1");
        }
        if !(0.0..1.0).contains(&self.drop_p) {
            return bad("drop probability must be in [0, 1)");
        }
        if self.convergence_window == 0 || self.episodes == 0 || self.steps_per_episode == 0 {
            return bad("episode, step and window budgets must be positive");
        }
        Ok(())
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        if self.epsilon_decay_episodes == 0 || episode >= self.epsilon_decay_episodes {
            return self.epsilon_end;
        }
        let t = episode as f64 / self.epsilon_decay_episodes as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }
}

/// `r` for terminal transitions, else `r + γ max Q(s')`.
pub fn bellman_target(r: f64, q_next_max: f64, gamma: f64, terminal: bool) -> f64 {
    if terminal {
        r
    } else {
        r + gamma * q_next_max
    }
}

/// ε-greedy choice. Always draws 16 bits for the explore test, plus 2 more
/// for the random action when exploring.
pub fn select_action(qvals: &[f64], epsilon: f64, rng: Lfsr) -> (usize, Lfsr) {
    let mut rng = rng;
    if rng.next_fraction() < epsilon {
        let a = rng.next_bits(2) as usize % qvals.len().max(1);
        (a, rng)
    } else {
        (argmax(qvals), rng)
    }
}

/// Result of a training step: the updated network and the MAC energy spent
/// on its forward passes.
#[derive(Debug, Clone)]
pub struct StepUpdate {
    pub net: QNetwork,
    pub energy_pj: f64,
}

/// Sequential semi-gradient updates over `batch`, each toward its Bellman
/// target computed with the current network.
pub fn train_step(
    net: &QNetwork,
    batch: &[Experience],
    cfg: &TrainConfig,
    mask: Option<&MaskPair>,
    hw: &Hardware,
) -> Result<StepUpdate, QnavError> {
    if batch.is_empty() {
        return Err(QnavError::Config("training batch is empty".into()));
    }
    let mut net = net.clone();
    let mut energy = 0.0;
    for e in batch {
        let next = super::network::q_forward(&net, &e.s_next, mask, hw)?;
        let target = bellman_target(e.r, next.max_q(), cfg.gamma, e.terminal);
        let codes: Vec<u32> = e.s.codes().iter().map(|&c| c as u32).collect();
        let cur = net.forward_codes(&codes, mask, hw)?;
        energy += next.energy_pj + cur.energy_pj;
        net.sgd_step(&codes, &cur, e.a, target, cfg.alpha, mask)?;
    }
    Ok(StepUpdate { net, energy_pj: energy })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub episode: usize,
    pub covered_cells: usize,
    pub reward: f64,
    pub energy_pj: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrace {
    pub rows: Vec<TraceRow>,
    /// Distinct cells visited in each completed episode.
    pub episode_coverage: Vec<usize>,
    pub free_cells: usize,
    /// 1-based episode at which the windowed coverage first met the threshold.
    pub episodes_to_convergence: Option<usize>,
    pub total_energy_pj: f64,
    pub final_network: QNetwork,
}

impl TrainingTrace {
    pub fn converged(&self) -> bool {
        self.episodes_to_convergence.is_some()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,episode,covered_cells,reward,energy_pj\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{}\n", r.iteration, r.episode, r.covered_cells, r.reward, r.energy_pj));
        }
        s
    }
}

/// Independent LFSR streams derived from one seed.
struct Streams {
    init: Lfsr,
    action: Lfsr,
    mask: Lfsr,
    replay: Lfsr,
}

impl Streams {
    fn new(seed: u16) -> Result<Self, QnavError> {
        let base = Lfsr::new(seed)?;
        let derive = |salt: u32| Lfsr::from_seed_lossy(seed as u32 ^ salt.wrapping_mul(0x9E37));
        Ok(Self { init: derive(0x11), action: base, mask: derive(0x5A), replay: derive(0xC3) })
    }
}

fn draw_mask(net: &QNetwork, cfg: &TrainConfig, rng: &mut Lfsr) -> Result<Option<MaskPair>, QnavError> {
    if !cfg.stochastic {
        return Ok(None);
    }
    let (m, next) = MaskPair::draw(net, cfg.drop_p, *rng)?;
    *rng = next;
    Ok(Some(m))
}

fn windowed_converged(coverage: &[usize], cfg: &TrainConfig, free: usize) -> bool {
    let w = cfg.convergence_window;
    if coverage.len() < w {
        return false;
    }
    let mean = coverage[coverage.len() - w..].iter().sum::<usize>() as f64 / w as f64;
    mean >= cfg.convergence_fraction * free as f64
}

/// Runs ε-greedy Q-learning episodes from the arena's start pose, with replay
/// from the scratchpad after every step.
pub fn run_training(arena: &Arena, cfg: &TrainConfig, seed: u16, hw: &Hardware) -> Result<TrainingTrace, QnavError> {
    cfg.validate()?;
    let mut streams = Streams::new(seed)?;
    let mut net = QNetwork::random(&mut streams.init, cfg.init_range);
    let mut pad = Scratchpad::new(cfg.capacity);
    let free = arena.free_cells();
    let mut rows = Vec::new();
    let mut episode_coverage = Vec::new();
    let mut converged_at = None;
    let mut total_energy = 0.0;
    let mut iteration = 0usize;

    for episode in 0..cfg.episodes {
        let eps = cfg.epsilon(episode);
        let mut state = arena.start();
        let mut visited: HashSet<Cell> = HashSet::from([state.position]);
        let mut reading = sense(arena, state);
        for _ in 0..cfg.steps_per_episode {
            let mask = draw_mask(&net, cfg, &mut streams.mask)?;
            let fwd = super::network::q_forward(&net, &reading, mask.as_ref(), hw)?;
            let (a, rng) = select_action(&fwd.qvalues, eps, streams.action);
            streams.action = rng;
            let out = apply_action(arena, state, Action::ALL[a], &mut visited);
            let next_reading = sense(arena, out.state);
            pad.push(Experience::new(reading, a, out.reward, next_reading, false)?);
            let mut energy = fwd.energy_pj;
            if pad.len() >= cfg.batch_size {
                let batch = pad.sample(cfg.batch_size, &mut streams.replay);
                let upd = train_step(&net, &batch, cfg, mask.as_ref(), hw)?;
                net = upd.net;
                energy += upd.energy_pj;
            }
            total_energy += energy;
            rows.push(TraceRow {
                iteration,
                episode,
                covered_cells: visited.len(),
                reward: out.reward,
                energy_pj: energy,
            });
            iteration += 1;
            state = out.state;
            reading = next_reading;
        }
        episode_coverage.push(visited.len());
        if converged_at.is_none() && windowed_converged(&episode_coverage, cfg, free) {
            converged_at = Some(episode + 1);
            if cfg.stop_at_convergence {
                break;
            }
        }
    }
    Ok(TrainingTrace {
        rows,
        episode_coverage,
        free_cells: free,
        episodes_to_convergence: converged_at,
        total_energy_pj: total_energy,
        final_network: net,
    })
}

/// Mean fraction of free cells covered by the policy over `episodes`
/// episodes, acting with `epsilon` and (when `cfg.stochastic`) fresh masks.
pub fn evaluate_policy(
    net: &QNetwork,
    arena: &Arena,
    cfg: &TrainConfig,
    epsilon: f64,
    episodes: usize,
    seed: u16,
    hw: &Hardware,
) -> Result<f64, QnavError> {
    let mut streams = Streams::new(seed)?;
    let mut total = 0usize;
    for _ in 0..episodes {
        let mut state = arena.start();
        let mut visited: HashSet<Cell> = HashSet::from([state.position]);
        for _ in 0..cfg.steps_per_episode {
            let mask = draw_mask(net, cfg, &mut streams.mask)?;
            let fwd = super::network::q_forward(net, &sense(arena, state), mask.as_ref(), hw)?;
            let (a, rng) = select_action(&fwd.qvalues, epsilon, streams.action);
            streams.action = rng;
            state = apply_action(arena, state, Action::ALL[a], &mut visited).state;
        }
        total += visited.len();
    }
    Ok(total as f64 / (episodes.max(1) * arena.free_cells()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::macmodel::{EnergyParams, MacModel};
    use crate::qnav::network::NetScales;

    fn hw() -> Hardware {
        Hardware::new(MacModel::Digital, EnergyParams::default())
    }

    #[test]
    fn bellman_examples() {
        assert_eq!(bellman_target(1.0, 7.0, 0.9, true), 1.0);
        assert!((bellman_target(1.0, 2.0, 0.9, false) - 2.8).abs() < 1e-12);
        assert_eq!(bellman_target(0.0, 0.0, 0.9, false), 0.0);
    }

    #[test]
    fn greedy_selection() {
        let rng = Lfsr::new(0xACE1).unwrap();
        assert_eq!(select_action(&[0.0, 3.0, 1.0, 2.0], 0.0, rng).0, 1);
        assert_eq!(select_action(&[5.0, 5.0, 0.0, 0.0], 0.0, rng).0, 0);
    }

    #[test]
    fn uniform_exploration() {
        let mut rng = Lfsr::new(0xACE1).unwrap();
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            let (a, next) = select_action(&[0.0, 9.0, 0.0, 0.0], 1.0, rng);
            counts[a] += 1;
            rng = next;
        }
        for c in counts {
            let f = c as f64 / 10_000.0;
            assert!((0.22..=0.28).contains(&f), "{counts:?}");
        }
    }

    #[test]
    fn scratchpad_evicts_oldest() {
        let mut pad = Scratchpad::new(3);
        for i in 0..5u8 {
            pad.push(Experience::new(DepthReading([i, 0, 0]), 0, 0.0, DepthReading::default(), false).unwrap());
            assert!(pad.len() <= 3);
        }
        assert_eq!(pad.get(0).unwrap().s.0[0], 2);
        assert_eq!(pad.get(2).unwrap().s.0[0], 4);
    }

    #[test]
    fn experience_validation() {
        let d = DepthReading::default();
        assert!(Experience::new(d, 4, 0.0, d, false).is_err());
        assert!(Experience::new(d, 0, f64::NAN, d, false).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { alpha: 0.0, ..ok }.validate().is_err());
        assert!(TrainConfig { gamma: 1.0, ..ok }.validate().is_err());
        assert!(TrainConfig { capacity: 4, batch_size: 8, ..ok }.validate().is_err());
        assert!(TrainConfig { drop_p: 1.0, ..ok }.validate().is_err());
    }

    fn sample_batch(net: &QNetwork) -> Vec<Experience> {
        let _ = net;
        vec![
            Experience::new(DepthReading([3, 5, 2]), 1, 1.0, DepthReading([4, 4, 1]), false).unwrap(),
            Experience::new(DepthReading([1, 1, 9]), 0, -5.0, DepthReading([1, 1, 9]), false).unwrap(),
        ]
    }

    #[test]
    fn zero_alpha_is_identity() {
        let mut rng = Lfsr::new(0x4242).unwrap();
        let net = QNetwork::random(&mut rng, 0.5);
        let cfg = TrainConfig { alpha: 0.0, ..TrainConfig::default() };
        let out = train_step(&net, &sample_batch(&net), &cfg, None, &hw()).unwrap();
        assert_eq!(out.net, net);
    }

    #[test]
    fn zero_residual_is_identity() {
        // terminal transitions whose reward equals the current prediction
        let mut rng = Lfsr::new(0x2024).unwrap();
        let net = QNetwork::random(&mut rng, 0.5);
        let s = DepthReading([4, 6, 3]);
        let q = q_forward_values(&net, &s);
        let batch: Vec<Experience> =
            (0..4).map(|a| Experience::new(s, a, q[a], DepthReading::default(), true).unwrap()).collect();
        let out = train_step(&net, &batch, &TrainConfig { alpha: 1.0, ..TrainConfig::default() }, None, &hw()).unwrap();
        assert_eq!(out.net, net);
    }

    fn q_forward_values(net: &QNetwork, s: &DepthReading) -> Vec<f64> {
        crate::qnav::network::q_forward(net, s, None, &hw()).unwrap().qvalues
    }

    /// Real-valued forward of a 1→1→1 net whose codes are exact, for finite
    /// differences: q = w2 * relu(w1 * x).
    fn toy_q(w1: f64, w2: f64, x: f64) -> f64 {
        w2 * (w1 * x).max(0.0)
    }

    #[test]
    fn toy_net_update_matches_finite_difference_gradient() {
        let scales = NetScales { input_lsb: 1.0 / 63.0, weight_range: 1.0, hidden_range: 1.0 };
        // latent weights on the 6-bit grid so the quantized forward is exact
        let w1 = 42.0 / 63.0;
        let w2 = 21.0 / 63.0;
        let x_code = 63u32; // x = 1.0, hidden = w1 exactly
        let net = QNetwork::from_latent((1, 1, 1), vec![w1], vec![w2], scales).unwrap();
        let hw = hw();
        let fwd = net.forward_codes(&[x_code], None, &hw).unwrap();
        let x = x_code as f64 * scales.input_lsb;
        assert!((fwd.qvalues[0] - toy_q(w1, w2, x)).abs() < 1e-12);

        let target = 0.5;
        let loss = |a: f64, b: f64| 0.5 * (target - toy_q(a, b, x)).powi(2);
        let h = 1e-6;
        let g1 = (loss(w1 + h, w2) - loss(w1 - h, w2)) / (2.0 * h);
        let g2 = (loss(w1, w2 + h) - loss(w1, w2 - h)) / (2.0 * h);

        let mut updated = net.clone();
        updated.sgd_step(&[x_code], &fwd, 0, target, 1.0, None).unwrap();
        let d1 = updated.latent_hidden()[0] - w1;
        let d2 = updated.latent_output()[0] - w2;
        assert!((d1 + g1).abs() < 1e-6, "{d1} vs {}", -g1);
        assert!((d2 + g2).abs() < 1e-6, "{d2} vs {}", -g2);
    }

    #[test]
    fn training_is_deterministic() {
        let arena = Arena::open(6, 6);
        let cfg = TrainConfig { episodes: 5, steps_per_episode: 30, stochastic: true, ..TrainConfig::default() };
        let a = run_training(&arena, &cfg, 0xACE1, &hw()).unwrap();
        let b = run_training(&arena, &cfg, 0xACE1, &hw()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn coverage_never_decreases_within_episode() {
        let arena = Arena::default_arena();
        let cfg = TrainConfig { episodes: 4, steps_per_episode: 100, ..TrainConfig::default() };
        let t = run_training(&arena, &cfg, 0x0101, &hw()).unwrap();
        for pair in t.rows.windows(2) {
            if pair[0].episode == pair[1].episode {
                assert!(pair[1].covered_cells >= pair[0].covered_cells);
            }
        }
    }

    #[test]
    fn small_open_arena_converges() {
        let arena = Arena::open(4, 4);
        let cfg = TrainConfig { episodes: 1000, steps_per_episode: 60, ..TrainConfig::default() };
        let t = run_training(&arena, &cfg, 0x1234, &hw()).unwrap();
        assert!(t.converged());
    }
}
