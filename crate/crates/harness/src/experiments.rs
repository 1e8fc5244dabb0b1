use crate::config::{Experiment, RunConfig};
use crate::svg::{self, Series};
use anyhow::{bail, Context, Result};
use edgesim_core::macmodel::{calibrate_energy, energy_surface, mean_energy, BitWidth, MacModel, REFERENCE_ANCHORS};
use edgesim_core::neuroslam::{edges_csv, nodes_csv, path_csv, run_slam, SlamConfig, SlamRun, SyntheticWorld};
use edgesim_core::qnav::{evaluate_policy, run_training, Arena, Hardware, TrainConfig, TrainingTrace};
use edgesim_core::swarmlab::{run_scenario, run_workload, ComputeMode, Scenario, SwarmConfig, Workload, WorkloadMetrics};
use rayon::prelude::*;
use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Csv,
    Svg,
    Toml,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub kind: Kind,
    pub contents: String,
}

/// Output of one experiment: tables, optional plots, other files.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportBundle {
    pub artifacts: Vec<Artifact>,
}

impl ReportBundle {
    fn csv(&mut self, name: impl Into<String>, contents: String) {
        self.artifacts.push(Artifact { name: name.into(), kind: Kind::Csv, contents });
    }

    fn svg(&mut self, name: impl Into<String>, contents: String) {
        self.artifacts.push(Artifact { name: name.into(), kind: Kind::Svg, contents });
    }

    pub fn get(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }
}

pub fn run_experiment(cfg: &RunConfig) -> Result<ReportBundle> {
    cfg.validate()?;
    let mut out = ReportBundle::default();
    match cfg.experiment {
        Experiment::Calibrate => calibrate(cfg, &mut out)?,
        Experiment::MacSweep => mac_sweep(cfg, &mut out)?,
        Experiment::MacSurface => mac_surface(cfg, &mut out)?,
        Experiment::QnavTrain => qnav_train(cfg, &mut out)?,
        Experiment::SwarmRun => swarm_run(cfg, &mut out)?,
        Experiment::SlamRun => slam_run(cfg, &mut out)?,
    }
    if !cfg.plot {
        out.artifacts.retain(|a| a.kind != Kind::Svg);
    }
    Ok(out)
}

fn models(cfg: &RunConfig) -> Vec<MacModel> {
    cfg.model.map_or_else(|| MacModel::ALL.to_vec(), |m| vec![m])
}

fn bit_widths(lo: u8, hi: u8) -> Result<Vec<BitWidth>> {
    (lo..=hi).map(|b| BitWidth::new(b).map_err(Into::into)).collect()
}

fn calibrate(cfg: &RunConfig, out: &mut ReportBundle) -> Result<()> {
    let params = calibrate_energy(&REFERENCE_ANCHORS).context("calibration failed")?;
    let mut csv = String::from("bits,digital_pj,tdms_pj,hdms_pj,hdms_over_digital\n");
    let mut lines: Vec<Series> = MacModel::ALL.iter().map(|m| Series { label: m.name().into(), points: vec![] }).collect();
    for b in BitWidth::all() {
        let e: Vec<f64> = MacModel::ALL.iter().map(|&m| mean_energy(m, b, &params)).collect();
        let _ = writeln!(csv, "{},{},{},{},{}", b.bits(), e[0], e[1], e[2], e[2] / e[0]);
        for (s, v) in lines.iter_mut().zip(&e) {
            s.points.push((b.bits() as f64, *v));
        }
    }
    let mut anchors = String::from("bits,target_hdms_pj,fitted_hdms_pj,target_ratio,fitted_ratio\n");
    for a in REFERENCE_ANCHORS.iter() {
        let b = BitWidth::new(a.bits)?;
        let h = mean_energy(MacModel::Hdms, b, &params);
        let d = mean_energy(MacModel::Digital, b, &params);
        let _ = writeln!(anchors, "{},{},{},{},{}", b.bits(), a.mean_pj, h, a.ratio_to_digital, h / d);
    }
    out.csv("calibration.csv", csv);
    out.csv("calibration_anchors.csv", anchors);
    out.artifacts.push(Artifact { name: "params.toml".into(), kind: Kind::Toml, contents: toml::to_string(&params)? });
    if cfg.plot {
        out.svg("calibration.svg", svg::line_chart("Mean energy per MAC", "bit width", "pJ / MAC", &lines));
    }
    Ok(())
}

/// Exhaustive statistics over all non-negative operand pairs; the sign does
/// not change any model's energy.
pub fn sweep_row(model: MacModel, b: BitWidth, cfg: &RunConfig) -> Result<(usize, f64, f64, f64, f64)> {
    let s = energy_surface(b, model, &cfg.params)?;
    let n = s.len();
    let mean = s.iter().map(|p| p.energy_pj).sum::<f64>() / n as f64;
    let min = s.iter().map(|p| p.energy_pj).fold(f64::INFINITY, f64::min);
    let max = s.iter().map(|p| p.energy_pj).fold(f64::NEG_INFINITY, f64::max);
    let cycles = s.iter().map(|p| p.cycles as f64).sum::<f64>() / n as f64;
    Ok((n, mean, min, max, cycles))
}

fn mac_sweep(cfg: &RunConfig, out: &mut ReportBundle) -> Result<()> {
    let widths = bit_widths(cfg.mac.bits_lo, cfg.mac.bits_hi)?;
    let mut csv = String::from("model,bits,pairs,mean_energy_pj,min_energy_pj,max_energy_pj,mean_cycles\n");
    let mut lines = Vec::new();
    for m in models(cfg) {
        let rows: Vec<_> = widths.par_iter().map(|&b| sweep_row(m, b, cfg)).collect::<Result<_>>()?;
        let mut pts = Vec::new();
        for (b, (n, mean, min, max, cyc)) in widths.iter().zip(rows) {
            let _ = writeln!(csv, "{},{},{},{},{},{},{}", m.name(), b.bits(), n, mean, min, max, cyc);
            pts.push((b.bits() as f64, mean));
        }
        lines.push(Series { label: m.name().into(), points: pts });
    }
    out.csv("mac_sweep.csv", csv);
    out.svg("mac_sweep.svg", svg::line_chart("Mean energy per MAC", "bit width", "pJ / MAC", &lines));
    Ok(())
}

fn mac_surface(cfg: &RunConfig, out: &mut ReportBundle) -> Result<()> {
    let b = BitWidth::new(cfg.mac.surface_bits)?;
    let n = b.max_magnitude() as usize + 1;
    let mut csv = String::from("model,bits,x,w,energy_pj,cycles\n");
    for m in models(cfg) {
        let s = energy_surface(b, m, &cfg.params)?;
        for p in &s {
            let _ = writeln!(csv, "{},{},{},{},{},{}", m.name(), b.bits(), p.x, p.w, p.energy_pj, p.cycles);
        }
        // surface is x-major; the heatmap wants rows of constant w
        let mut grid = vec![0.0; n * n];
        for p in &s {
            grid[p.w as usize * n + p.x as usize] = p.energy_pj;
        }
        let title = format!("{} energy per MAC, {}-bit", m.name(), b.bits());
        out.svg(format!("mac_surface_{}.svg", m.name()), svg::heatmap(&title, "|x|", "|w|", n, n, &grid));
    }
    out.csv("mac_surface.csv", csv);
    Ok(())
}

pub struct QnavOutcome {
    pub seed: u16,
    pub stochastic: bool,
    pub trace: TrainingTrace,
    pub eval_coverage: f64,
}

pub fn qnav_jobs(cfg: &RunConfig) -> Result<Vec<QnavOutcome>> {
    let arena = match &cfg.qnav.arena {
        Some(text) => Arena::parse(text)?,
        None => Arena::default_arena(),
    };
    let hw = Hardware::new(cfg.model.unwrap_or(MacModel::Tdms), cfg.params);
    let jobs: Vec<(u16, bool)> =
        cfg.seeds().into_iter().flat_map(|s| cfg.qnav.variant.flags().iter().map(move |&v| (s, v))).collect();
    jobs.par_iter()
        .map(|&(seed, stochastic)| {
            let tc = TrainConfig {
                episodes: cfg.qnav.episodes,
                steps_per_episode: cfg.qnav.steps,
                drop_p: cfg.qnav.drop_p,
                stochastic,
                stop_at_convergence: cfg.qnav.stop_at_convergence,
                ..TrainConfig::default()
            };
            let trace = run_training(&arena, &tc, seed, &hw)?;
            let eval_coverage = evaluate_policy(&trace.final_network, &arena, &tc, tc.epsilon_end, 10, seed, &hw)?;
            Ok(QnavOutcome { seed, stochastic, trace, eval_coverage })
        })
        .collect()
}

fn variant_name(stochastic: bool) -> &'static str {
    if stochastic {
        "stochastic"
    } else {
        "deterministic"
    }
}

fn qnav_train(cfg: &RunConfig, out: &mut ReportBundle) -> Result<()> {
    let runs = qnav_jobs(cfg)?;
    let mut trace = String::from("seed,variant,iteration,episode,covered_cells,reward,energy_pj\n");
    let mut episodes = String::from("seed,variant,episode,covered_cells,free_cells\n");
    let mut summary =
        String::from("seed,variant,episodes_to_convergence,episodes_run,free_cells,total_energy_pj,eval_coverage\n");
    let mut lines = Vec::new();
    for r in &runs {
        let v = variant_name(r.stochastic);
        let seed = format!("{:#06x}", r.seed);
        for row in &r.trace.rows {
            let _ = writeln!(
                trace,
                "{seed},{v},{},{},{},{},{}",
                row.iteration, row.episode, row.covered_cells, row.reward, row.energy_pj
            );
        }
        for (k, c) in r.trace.episode_coverage.iter().enumerate() {
            let _ = writeln!(episodes, "{seed},{v},{k},{c},{}", r.trace.free_cells);
        }
        let conv = r.trace.episodes_to_convergence.map_or(String::new(), |e| e.to_string());
        let _ = writeln!(
            summary,
            "{seed},{v},{conv},{},{},{},{}",
            r.trace.episode_coverage.len(),
            r.trace.free_cells,
            r.trace.total_energy_pj,
            r.eval_coverage
        );
        if r.seed == cfg.seed {
            let pts = r.trace.episode_coverage.iter().enumerate().map(|(k, &c)| (k as f64, c as f64)).collect();
            lines.push(Series { label: v.into(), points: pts });
        }
    }
    out.csv("qnav_trace.csv", trace);
    out.csv("qnav_episodes.csv", episodes);
    out.csv("qnav_summary.csv", summary);
    out.svg("qnav_coverage.svg", svg::line_chart("Covered cells per episode", "episode", "distinct cells", &lines));
    Ok(())
}

pub struct SwarmOutcome {
    pub seed: u16,
    pub metrics: WorkloadMetrics,
}

pub fn swarm_jobs(cfg: &RunConfig) -> Result<Vec<SwarmOutcome>> {
    let mode = if cfg.swarm.mode == "reference" { ComputeMode::Reference } else { ComputeMode::Hardware };
    let tasks: Vec<Workload> = cfg.swarm.tasks.iter().map(|t| t.parse()).collect::<Result<_, _>>()?;
    let scenario = cfg.swarm.scenario.as_deref().map(Scenario::parse).transpose()?;
    let mut jobs = Vec::new();
    for seed in cfg.seeds() {
        for &task in &tasks {
            match &scenario {
                Some(s) => {
                    if s.workload != task {
                        bail!("scenario is a {} scenario but task {} was requested", s.workload.name(), task.name());
                    }
                    jobs.push((seed, task, s.agents.len()));
                }
                None => jobs.extend(cfg.swarm.agents.iter().map(|&n| (seed, task, n))),
            }
        }
    }
    jobs.par_iter()
        .map(|&(seed, task, n)| {
            let sc = SwarmConfig { mode, ..SwarmConfig::new(task, n, seed) };
            let metrics = match &scenario {
                Some(s) => run_scenario(&sc, s, &cfg.params, cfg.swarm.budget)?,
                None => run_workload(&sc, &cfg.params, cfg.swarm.budget)?,
            };
            Ok(SwarmOutcome { seed, metrics })
        })
        .collect()
}

pub fn energy_per_action(m: &WorkloadMetrics) -> f64 {
    let actions = m.actions_per_agent * m.n_agents as f64;
    if actions > 0.0 {
        m.energy_pj / actions
    } else {
        0.0
    }
}

fn swarm_run(cfg: &RunConfig, out: &mut ReportBundle) -> Result<()> {
    let runs = swarm_jobs(cfg)?;
    let mut csv = format!("seed,{},energy_per_action_pj\n", WorkloadMetrics::CSV_HEADER);
    for r in &runs {
        let _ = writeln!(csv, "{:#06x},{},{}", r.seed, r.metrics.csv_row(), energy_per_action(&r.metrics));
    }
    out.csv("swarm.csv", csv);
    let mut bars: Vec<(String, f64, usize)> = Vec::new();
    for r in &runs {
        let label = format!("{} n={}", r.metrics.workload.name(), r.metrics.n_agents);
        match bars.iter_mut().find(|b| b.0 == label) {
            Some(b) => {
                b.1 += energy_per_action(&r.metrics);
                b.2 += 1;
            }
            None => bars.push((label, energy_per_action(&r.metrics), 1)),
        }
    }
    let bars: Vec<(String, f64)> = bars.into_iter().map(|(l, s, k)| (l, s / k as f64)).collect();
    out.svg("swarm_energy.svg", svg::bar_chart("Energy per action", "pJ / action", &bars));
    Ok(())
}

pub fn slam_world(cfg: &RunConfig, seed: u16) -> Result<SyntheticWorld> {
    let mut world = match &cfg.slam.world {
        Some(text) => {
            // replicate k offsets the file's texture seed by k
            let w = SyntheticWorld::parse(text)?;
            SyntheticWorld { texture_seed: w.texture_seed + (seed - cfg.seed) as u64, ..w }
        }
        None => SyntheticWorld { texture_seed: seed as u64, ..SyntheticWorld::square_loop() },
    };
    if let Some(s) = cfg.slam.noise_sigma {
        world.noise_sigma = s;
    }
    world.validate()?;
    Ok(world)
}

pub struct SlamOutcome {
    pub seed: u16,
    pub loop_closure: bool,
    pub run: SlamRun,
}

pub fn slam_jobs(cfg: &RunConfig) -> Result<Vec<SlamOutcome>> {
    let jobs: Vec<(u16, bool)> =
        cfg.seeds().into_iter().flat_map(|s| cfg.slam.loop_closure.flags().iter().map(move |&l| (s, l))).collect();
    jobs.par_iter()
        .map(|&(seed, loop_closure)| {
            let world = slam_world(cfg, seed)?;
            let sc = SlamConfig { loop_closure, ..SlamConfig::default() };
            let run = run_slam(&world, &sc, &cfg.params)?;
            Ok(SlamOutcome { seed, loop_closure, run })
        })
        .collect()
}

fn slam_run(cfg: &RunConfig, out: &mut ReportBundle) -> Result<()> {
    let runs = slam_jobs(cfg)?;
    let mut summary = String::from(
        "seed,loop_closure,frames,templates,experiences,loop_closures,final_error,dead_reckoning_error,ops,energy_pj,chip_energy_pj,chip_power_mw,min_unimodal_fraction,max_normalization_error\n",
    );
    let mut ops = String::from("seed,loop_closure,profile,odometry,template,attractor,path_integration\n");
    for r in &runs {
        let m = &r.run.metrics;
        let lc = if r.loop_closure { "on" } else { "off" };
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let _ = writeln!(
            summary,
            "{:#06x},{lc},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            m.frames,
            m.templates,
            m.experiences,
            m.loop_closures,
            opt(m.final_error),
            opt(m.dead_reckoning_error),
            m.ops.total(),
            m.energy_pj,
            m.chip_energy_pj,
            m.chip_power_mw,
            m.min_unimodal_fraction,
            m.max_normalization_error
        );
        let o = m.ops;
        let _ = writeln!(
            ops,
            "{:#06x},{lc},{},{},{},{},{}",
            r.seed, o.profile, o.odometry, o.template, o.attractor, o.path_integration
        );
        let tag = format!("{:04x}_{lc}", r.seed);
        out.csv(format!("slam_path_{tag}.csv"), path_csv(&r.run.rows));
        out.csv(format!("slam_nodes_{tag}.csv"), nodes_csv(&r.run.map));
        out.csv(format!("slam_edges_{tag}.csv"), edges_csv(&r.run.map));
        let truth: Vec<(f64, f64)> = r.run.rows.iter().filter_map(|row| row.truth.map(|t| (t.x, t.y))).collect();
        let est = r.run.rows.iter().map(|row| (row.estimate.x, row.estimate.y)).collect();
        let nodes = r.run.map.nodes.iter().map(|n| (n.pose.x, n.pose.y)).collect();
        let series = vec![
            Series { label: "true".into(), points: truth },
            Series { label: "online estimate".into(), points: est },
            Series { label: "relaxed map".into(), points: nodes },
        ];
        out.svg(
            format!("slam_path_{tag}.svg"),
            svg::line_chart(&format!("Trajectory, seed {:#06x}, loop closure {lc}", r.seed), "x", "y", &series),
        );
    }
    out.csv("slam_summary.csv", summary);
    out.csv("slam_ops.csv", ops);
    Ok(())
}
