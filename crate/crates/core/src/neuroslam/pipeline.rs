//! Frame loop tying the front end, pose cells and experience map together.

use super::vision::vo_from_profiles;
use super::{
    can_step, expmap_relax, expmap_update, inject, packet_centroid, path_integrate, profile, ring_delta, rotate_heading,
    template_match, wrap_angle, ExcitationKernel, ExperienceMap, HeadDirectionRing, IntensityImage, Observation, Pose,
    PoseCellGrid, SlamError, SyntheticWorld, ViewTemplate, VoConfig,
};
use crate::macmodel::{mean_energy, BitWidth, EnergyParams, MacModel};
use std::f64::consts::TAU;
use std::fmt::Write;

/// Reported chip power, mW.
pub const CHIP_POWER_MW: f64 = 23.82;
/// Reported chip efficiency, operations per joule.
pub const CHIP_OPS_PER_JOULE: f64 = 8.79e12;

#[derive(Debug, Clone, PartialEq)]
pub struct SlamConfig {
    pub dims: [usize; 3],
    pub kernel: ExcitationKernel,
    /// World units per pose cell along x and y.
    pub cell_size: f64,
    /// Speed per unit of residual profile difference.
    pub speed_gain: f64,
    pub max_speed: f64,
    /// Largest column shift searched; `None` means a quarter of the width.
    pub max_shift: Option<usize>,
    pub template_threshold: f64,
    /// Pose-cell distance (cells) from the current experience that makes an
    /// observation novel.
    pub novelty_cells: f64,
    pub injection_strength: f64,
    pub loop_closure: bool,
    /// Matches to any of the most recent experiences are not loop closures.
    pub min_loop_gap: usize,
    /// Attractor steps run on the initial impulse before the first frame.
    pub warmup_steps: usize,
    /// Attractor steps per frame.
    pub attractor_steps: usize,
    /// Frames after the start or an injection before packet shape is checked.
    pub settle_frames: usize,
    pub check_interval: usize,
    pub unimodal_radius: f64,
    pub relax_iterations: usize,
    /// Operand width used for the energy estimate.
    pub bits: u8,
}

impl Default for SlamConfig {
    fn default() -> Self {
        Self {
            dims: PoseCellGrid::DEFAULT_DIMS,
            kernel: ExcitationKernel::default(),
            cell_size: 0.5,
            speed_gain: 0.02,
            max_speed: 0.5,
            max_shift: None,
            template_threshold: 6.0,
            novelty_cells: 2.0,
            injection_strength: 0.1,
            loop_closure: true,
            min_loop_gap: 5,
            warmup_steps: 10,
            attractor_steps: 3,
            settle_frames: 10,
            check_interval: 10,
            unimodal_radius: 3.0,
            relax_iterations: 50,
            bits: 8,
        }
    }
}

impl SlamConfig {
    pub fn validate(&self) -> Result<(), SlamError> {
        let bad = |m: &str| Err(SlamError::Config(m.into()));
        if self.dims.contains(&0) {
            return bad("pose-cell dimensions must be positive");
        }
        if !(self.cell_size > 0.0 && self.speed_gain >= 0.0 && self.max_speed >= 0.0) {
            return bad("cell size must be positive and speed terms non-negative");
        }
        if !(self.template_threshold > 0.0 && self.novelty_cells > 0.0) {
            return bad("template threshold and novelty distance must be positive");
        }
        if !(self.injection_strength > 0.0 && self.injection_strength <= 1.0) {
            return bad("injection strength outside (0, 1]");
        }
        if self.check_interval == 0 {
            return bad("check interval must be positive");
        }
        BitWidth::new(self.bits).map_err(|e| SlamError::Config(e.to_string()))?;
        Ok(())
    }
}

/// Frames to process, with optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SlamInput {
    pub frames: Vec<IntensityImage>,
    pub truth: Option<Vec<Pose>>,
    pub start: Pose,
    pub fov: f64,
}

impl SlamInput {
    pub fn from_world(world: &SyntheticWorld) -> Result<Self, SlamError> {
        world.validate()?;
        let (truth, frames): (Vec<Pose>, Vec<IntensityImage>) = world.frames().into_iter().unzip();
        Ok(Self { start: truth[0], truth: Some(truth), frames, fov: world.fov })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRow {
    pub frame: usize,
    pub truth: Option<Pose>,
    pub estimate: Pose,
    pub template: usize,
    pub loop_closed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OpCounts {
    pub profile: u64,
    pub odometry: u64,
    pub template: u64,
    pub attractor: u64,
    pub path_integration: u64,
}

impl OpCounts {
    pub fn total(&self) -> u64 {
        self.profile + self.odometry + self.template + self.attractor + self.path_integration
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlamMetrics {
    pub frames: usize,
    pub templates: usize,
    pub experiences: usize,
    pub loop_closures: usize,
    /// Distance between the relaxed final estimate and the true final pose.
    pub final_error: Option<f64>,
    /// Same for pure odometry integration from the start pose.
    pub dead_reckoning_error: Option<f64>,
    pub ops: OpCounts,
    /// All operations costed at the mean HD-MS MAC energy.
    pub energy_pj: f64,
    /// All operations costed at the reported chip efficiency.
    pub chip_energy_pj: f64,
    pub chip_power_mw: f64,
    /// Smallest fraction of activity near the centroid over the checks.
    pub min_unimodal_fraction: f64,
    pub unimodal_checks: usize,
    /// Largest |Σ − 1| seen after any attractor step or injection.
    pub max_normalization_error: f64,
    pub min_activity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlamRun {
    pub rows: Vec<PathRow>,
    /// Map after relaxation.
    pub map: ExperienceMap,
    pub final_estimate: Pose,
    pub metrics: SlamMetrics,
}

fn diff_ops(width: usize, max_shift: usize) -> u64 {
    let w = width as u64;
    (-(max_shift as i64)..=max_shift as i64).map(|s| w - s.unsigned_abs()).sum()
}

fn to_cells(p: Pose, cell_size: f64, dims: [usize; 3]) -> [f64; 3] {
    [
        (p.x / cell_size).rem_euclid(dims[0] as f64),
        (p.y / cell_size).rem_euclid(dims[1] as f64),
        p.theta.rem_euclid(TAU) / TAU * dims[2] as f64,
    ]
}

fn cell_distance(a: [f64; 3], b: [f64; 3], dims: [usize; 3]) -> f64 {
    (0..3).map(|k| ring_delta(a[k], b[k], dims[k]).powi(2)).sum::<f64>().sqrt()
}

struct GridHealth {
    max_norm_error: f64,
    min_activity: f64,
}

impl GridHealth {
    fn record(&mut self, g: &PoseCellGrid) {
        self.max_norm_error = self.max_norm_error.max((g.total() - 1.0).abs());
        let m = g.activity().iter().copied().fold(f64::INFINITY, f64::min);
        self.min_activity = self.min_activity.min(m);
    }
}

pub fn run_slam(world: &SyntheticWorld, cfg: &SlamConfig, params: &EnergyParams) -> Result<SlamRun, SlamError> {
    run_sequence(&SlamInput::from_world(world)?, cfg, params)
}

/// Per frame: odometry, head direction, path integration, attractor step,
/// template match, injection on loop closure, map update. The map is relaxed
/// once at the end.
pub fn run_sequence(input: &SlamInput, cfg: &SlamConfig, params: &EnergyParams) -> Result<SlamRun, SlamError> {
    cfg.validate()?;
    let Some(first) = input.frames.first() else {
        return Err(SlamError::Config("no frames".into()));
    };
    if let Some(t) = &input.truth {
        if t.len() != input.frames.len() {
            return Err(SlamError::Config(format!("{} truth poses for {} frames", t.len(), input.frames.len())));
        }
    }
    let (w, h) = (first.width(), first.height());
    if input.frames.iter().any(|f| f.width() != w || f.height() != h) {
        return Err(SlamError::Image("frame sizes differ".into()));
    }
    let dims = cfg.dims;
    let n_cells = (dims[0] * dims[1] * dims[2]) as u64;
    let mut vo = VoConfig::new(input.fov, w);
    vo.speed_gain = cfg.speed_gain;
    vo.max_speed = cfg.max_speed;
    if let Some(m) = cfg.max_shift {
        vo.max_shift = m.clamp(1, w - 1);
    }
    let shift_ops = diff_ops(w, vo.max_shift);

    let mut ops = OpCounts::default();
    let mut health = GridHealth { max_norm_error: 0.0, min_activity: f64::INFINITY };

    let start_cell = to_cells(input.start, cfg.cell_size, dims);
    let mut grid = PoseCellGrid::impulse(dims, start_cell.map(|c| c.round() as i64))?;
    for _ in 0..cfg.warmup_steps {
        grid = can_step(&grid, &cfg.kernel)?;
        ops.attractor += n_cells * cfg.kernel.macs_per_cell();
        health.record(&grid);
    }
    let mut hd = HeadDirectionRing::new(dims[2], input.start.theta);
    let mut store: Vec<ViewTemplate> = Vec::new();
    let mut map = ExperienceMap::new(input.start);
    let mut dead = input.start;
    let mut delta = Pose::default();

    let mut prev = profile(first);
    ops.profile += (w * h) as u64;
    let tm = template_match(&prev, &mut store, cfg.template_threshold, vo.max_shift)?;
    let cell = packet_centroid(&grid)?;
    map = expmap_update(&map, &Observation { cell, template: tm.id, delta, loop_match: None, novel: true })?;
    store[tm.id].experience = map.current;

    let mut rows = Vec::with_capacity(input.frames.len());
    let truth_at = |k: usize| input.truth.as_ref().map(|t| t[k]);
    rows.push(PathRow { frame: 0, truth: truth_at(0), estimate: input.start, template: tm.id, loop_closed: false });
    let mut since_disturb = 0usize;
    let mut min_unimodal = 1.0f64;
    let mut checks = 0usize;

    for (k, img) in input.frames.iter().enumerate().skip(1) {
        let p = profile(img);
        ops.profile += (w * h) as u64;
        let odo = vo_from_profiles(&prev, &p, &vo)?;
        ops.odometry += shift_ops;
        prev = p;

        hd.rotate(odo.dtheta);
        let heading = hd.heading();
        let step = Pose::new(odo.v * heading.cos(), odo.v * heading.sin(), odo.dtheta);
        delta = Pose::new(delta.x + step.x, delta.y + step.y, delta.theta + step.theta);
        dead = dead.plus(step);

        if odo.dtheta != 0.0 {
            grid = rotate_heading(&grid, odo.dtheta);
            ops.path_integration += 2 * n_cells;
        }
        if odo.v != 0.0 {
            grid = path_integrate(&grid, odo.v / cfg.cell_size, heading);
            ops.path_integration += 4 * n_cells;
        }
        for _ in 0..cfg.attractor_steps {
            grid = can_step(&grid, &cfg.kernel)?;
            ops.attractor += n_cells * cfg.kernel.macs_per_cell();
            health.record(&grid);
        }

        let tm = template_match(&prev, &mut store, cfg.template_threshold, vo.max_shift)?;
        ops.template += shift_ops * (store.len() - tm.new as usize) as u64;
        let cur = map.current.expect("map has a current experience");
        let linked = if tm.new { None } else { store[tm.id].experience };
        let loop_match = linked.filter(|&e| cfg.loop_closure && e != cur && e + cfg.min_loop_gap < map.nodes.len());

        if let Some(m) = loop_match {
            grid = inject(&grid, map.nodes[m].cell, cfg.injection_strength)?;
            health.record(&grid);
            since_disturb = 0;
        }
        let cell = packet_centroid(&grid)?;
        let novel = tm.new || cell_distance(cell, map.nodes[cur].cell, dims) > cfg.novelty_cells;
        let obs = Observation { cell, template: tm.id, delta, loop_match, novel };
        let before = map.current;
        map = expmap_update(&map, &obs)?;
        if map.current != before {
            delta = Pose::default();
            if tm.new && loop_match.is_none() {
                store[tm.id].experience = map.current;
            }
        }

        since_disturb += 1;
        if k % cfg.check_interval == 0 && k >= cfg.settle_frames && since_disturb >= cfg.settle_frames {
            let c = packet_centroid(&grid)?;
            min_unimodal = min_unimodal.min(grid.mass_within(c, cfg.unimodal_radius));
            checks += 1;
        }

        let base = map.current_pose().expect("current experience");
        let estimate = Pose::new(base.x + delta.x, base.y + delta.y, (base.theta + delta.theta).rem_euclid(TAU));
        rows.push(PathRow { frame: k, truth: truth_at(k), estimate, template: tm.id, loop_closed: loop_match.is_some() });
    }

    let relaxed = expmap_relax(&map, cfg.relax_iterations);
    let base = relaxed.current_pose().expect("current experience");
    let final_estimate = Pose::new(base.x + delta.x, base.y + delta.y, (base.theta + delta.theta).rem_euclid(TAU));
    let last_truth = truth_at(input.frames.len() - 1);

    let bits = BitWidth::new(cfg.bits).map_err(|e| SlamError::Config(e.to_string()))?;
    let per_op = mean_energy(MacModel::Hdms, bits, params);
    let total = ops.total() as f64;
    let metrics = SlamMetrics {
        frames: input.frames.len(),
        templates: store.len(),
        experiences: relaxed.nodes.len(),
        loop_closures: relaxed.loop_closures(),
        final_error: last_truth.map(|t| t.distance(final_estimate)),
        dead_reckoning_error: last_truth.map(|t| t.distance(dead)),
        ops,
        energy_pj: total * per_op,
        chip_energy_pj: total / CHIP_OPS_PER_JOULE * 1e12,
        chip_power_mw: CHIP_POWER_MW,
        min_unimodal_fraction: min_unimodal,
        unimodal_checks: checks,
        max_normalization_error: health.max_norm_error,
        min_activity: health.min_activity,
    };
    Ok(SlamRun { rows, map: relaxed, final_estimate, metrics })
}

pub const PATH_CSV_HEADER: &str = "frame,x_true,y_true,θ_true,x_est,y_est,θ_est,template_id,loop_closed";

pub fn path_csv(rows: &[PathRow]) -> String {
    let mut s = String::from(PATH_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let t = r.truth.map_or(["nan".to_string(), "nan".into(), "nan".into()], |t| {
            [t.x.to_string(), t.y.to_string(), t.theta.to_string()]
        });
        let e = r.estimate;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.frame, t[0], t[1], t[2], e.x, e.y, e.theta, r.template, r.loop_closed as u8
        );
    }
    s
}

pub fn nodes_csv(map: &ExperienceMap) -> String {
    let mut s = String::from("id,x,y,theta,template_id\n");
    for n in &map.nodes {
        let _ = writeln!(s, "{},{},{},{},{}", n.id, n.pose.x, n.pose.y, n.pose.theta, n.template);
    }
    s
}

pub fn edges_csv(map: &ExperienceMap) -> String {
    let mut s = String::from("from,to,dx,dy,dtheta,kind\n");
    for e in &map.edges {
        let _ = writeln!(s, "{},{},{},{},{},{}", e.from, e.to, e.delta.x, e.delta.y, wrap_angle(e.delta.theta), e.kind.name());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> EnergyParams {
        EnergyParams::default()
    }

    #[test]
    fn stationary_camera_stays_put() {
        let world = SyntheticWorld::square_loop();
        let start = Pose::new(4.0, 6.0, 1.0);
        let frame = world.render(start, 0);
        let input = SlamInput { frames: vec![frame; 40], truth: Some(vec![start; 40]), start, fov: world.fov };
        let run = run_sequence(&input, &SlamConfig::default(), &params()).unwrap();
        assert!(run.metrics.final_error.unwrap() < 1e-12);
        assert_eq!(run.metrics.experiences, 1);
        assert!(run.rows.iter().all(|r| r.estimate.distance(start) < 1e-12));
    }

    #[test]
    fn grid_stays_healthy_on_square_loop() {
        let run = run_slam(&SyntheticWorld::square_loop(), &SlamConfig::default(), &params()).unwrap();
        let m = &run.metrics;
        assert!(m.max_normalization_error < 1e-9, "{}", m.max_normalization_error);
        assert!(m.min_activity >= 0.0);
        assert!(m.unimodal_checks > 10);
        assert!(m.min_unimodal_fraction >= 0.9, "{}", m.min_unimodal_fraction);
    }

    #[test]
    fn loop_closure_halves_final_error() {
        let world = SyntheticWorld::square_loop();
        let on = run_slam(&world, &SlamConfig::default(), &params()).unwrap();
        let off = run_slam(&world, &SlamConfig { loop_closure: false, ..SlamConfig::default() }, &params()).unwrap();
        let (e_on, e_off) = (on.metrics.final_error.unwrap(), off.metrics.final_error.unwrap());
        assert!(on.metrics.loop_closures >= 1);
        assert_eq!(off.metrics.loop_closures, 0);
        assert!(e_off > 0.1, "{e_off}");
        assert!(e_on < 0.5 * e_off, "{e_on} vs {e_off}");
        assert!((off.metrics.dead_reckoning_error.unwrap() - e_off).abs() < 1e-9);
    }

    #[test]
    fn deterministic_outputs() {
        let world = SyntheticWorld { noise_sigma: 2.0, ..SyntheticWorld::square_loop() };
        let a = run_slam(&world, &SlamConfig::default(), &params()).unwrap();
        let b = run_slam(&world, &SlamConfig::default(), &params()).unwrap();
        assert_eq!(path_csv(&a.rows), path_csv(&b.rows));
        assert_eq!(a, b);
    }

    #[test]
    fn csv_shapes() {
        let run = run_slam(&SyntheticWorld::square_loop(), &SlamConfig::default(), &params()).unwrap();
        let path = path_csv(&run.rows);
        assert_eq!(path.lines().count(), run.rows.len() + 1);
        assert!(path.lines().all(|l| l.split(',').count() == 9));
        assert_eq!(nodes_csv(&run.map).lines().count(), run.map.nodes.len() + 1);
        assert_eq!(edges_csv(&run.map).lines().count(), run.map.edges.len() + 1);
    }

    #[test]
    fn rejects_bad_config() {
        let world = SyntheticWorld::square_loop();
        for cfg in [
            SlamConfig { injection_strength: 0.0, ..SlamConfig::default() },
            SlamConfig { template_threshold: 0.0, ..SlamConfig::default() },
            SlamConfig { bits: 9, ..SlamConfig::default() },
        ] {
            assert!(run_slam(&world, &cfg, &params()).is_err());
        }
    }
}
