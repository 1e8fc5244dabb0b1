use approx::assert_relative_eq;
use edgesim_core::macmodel::{
    digital_mac, hdms_mac, tdms_mac, BitWidth, EnergyParams, MacModel, Operand, Sign,
};
use edgesim_core::neuroslam::{
    can_step, expmap_relax, expmap_update, inject, path_integrate, rotate_heading, ExcitationKernel, ExperienceMap,
    HeadDirectionRing, Observation, Pose, PoseCellGrid,
};
use edgesim_core::stochsyn::{drop_mask, lfsr_next, Lfsr};
use edgesim_core::swarmlab::{
    bitwidth_for_swarm, nfe_build, nfe_eval, run_workload, workload_step, NfeFunction, Scenario,
    SwarmConfig, Workload, World,
};
use proptest::prelude::*;
use std::f64::consts::TAU;

fn operand(b: u8) -> impl Strategy<Value = Operand> {
    ((0u32..(1 << b)), any::<bool>())
        .prop_map(|(m, neg)| Operand::new(m, if neg { Sign::Neg } else { Sign::Pos }))
}

fn width_and_pair() -> impl Strategy<Value = (u8, Operand, Operand)> {
    (3u8..=8).prop_flat_map(|b| (Just(b), operand(b), operand(b)))
}

fn grid_strategy(dims: [usize; 3]) -> impl Strategy<Value = PoseCellGrid> {
    let n = dims.iter().product::<usize>();
    proptest::collection::vec(0.0f64..1.0, n).prop_map(move |v| {
        let mut g = PoseCellGrid::zeros(dims).unwrap();
        let mut k = 0;
        for x in 0..dims[0] as i64 {
            for y in 0..dims[1] as i64 {
                for t in 0..dims[2] as i64 {
                    g.add([x, y, t], v[k] + 1e-3);
                    k += 1;
                }
            }
        }
        g
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn mac_models_agree((b, x, w) in width_and_pair(), acc in -5000i64..5000) {
        let p = EnergyParams::default();
        let bw = BitWidth::new(b).unwrap();
        let expect = acc + x.to_signed() * w.to_signed();
        prop_assert_eq!(digital_mac(x, w, acc, &p, bw).unwrap().value, expect);
        prop_assert_eq!(tdms_mac(x, w, acc, &p, bw).unwrap().value, expect);
        prop_assert_eq!(hdms_mac(x, w, acc, &p, bw).unwrap().value, expect);
    }

    #[test]
    fn tdms_energy_follows_product((b, x1, w1) in width_and_pair(), m2 in 0u32..256, n2 in 0u32..256) {
        let p = EnergyParams::default();
        let bw = BitWidth::new(b).unwrap();
        let mask = bw.max_magnitude();
        let (x2, w2) = (Operand::pos(m2 & mask), Operand::pos(n2 & mask));
        let e = |x: Operand, w: Operand| tdms_mac(x, w, 0, &p, bw).unwrap().energy_pj;
        let (p1, p2) = (x1.magnitude * w1.magnitude, x2.magnitude * w2.magnitude);
        if p1 <= p2 {
            prop_assert!(e(x1, w1) <= e(x2, w2));
        } else {
            prop_assert!(e(x1, w1) >= e(x2, w2));
        }
    }

    #[test]
    fn energy_scales_with_supply_squared((b, x, w) in width_and_pair(), model in 0usize..3) {
        let lo = EnergyParams::default().at_supply(0.4).unwrap();
        let hi = lo.at_supply(0.8).unwrap();
        let bw = BitWidth::new(b).unwrap();
        let m = MacModel::ALL[model];
        let el = m.mac(x, w, 0, &lo, bw).unwrap().energy_pj;
        let eh = m.mac(x, w, 0, &hi, bw).unwrap().energy_pj;
        assert_relative_eq!(eh, 4.0 * el, max_relative = 1e-12);
    }

    #[test]
    fn lfsr_never_hits_zero(seed in 1u16..=u16::MAX) {
        let mut s = seed;
        for _ in 0..2000 {
            let (_, next) = lfsr_next(s).unwrap();
            prop_assert_ne!(next, 0);
            s = next;
        }
    }

    #[test]
    fn masks_repeat_for_equal_seeds(seed in 1u16..=u16::MAX, p in 0.0f64..1.0) {
        let a = drop_mask((8, 8), p, Lfsr::new(seed).unwrap()).unwrap();
        let b = drop_mask((8, 8), p, Lfsr::new(seed).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn nfe_tables_are_continuous(f in 0usize..4, n in 2usize..64, lo in -3.0f64..0.0, span in 0.1f64..3.0) {
        let f = [NfeFunction::ExpNeg, NfeFunction::Sigmoid, NfeFunction::Sine, NfeFunction::Recip][f];
        let domain = if f == NfeFunction::Recip { (0.05 + lo.abs(), 0.05 + lo.abs() + span) } else { (lo, lo + span) };
        let t = nfe_build(f, domain, n).unwrap();
        let bp = t.breakpoints();
        for i in 0..t.n_segments() - 1 {
            prop_assert_eq!(t.eval_segment(i, bp[i + 1]), t.eval_segment(i + 1, bp[i + 1]));
        }
        // the table interpolates the function at every breakpoint
        for &x in bp {
            assert_relative_eq!(nfe_eval(&t, x), f.exact(x), max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn path_integration_conserves_mass(g in grid_strategy([6, 5, 4]), v in 0.0f64..4.0, theta in 0.0f64..TAU, dt in -3.0f64..3.0) {
        let before = g.total();
        let moved = rotate_heading(&path_integrate(&g, v, theta), dt);
        prop_assert!((moved.total() - before).abs() <= 1e-12 * before);
        prop_assert!(moved.activity().iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn attractor_and_injection_stay_normalized(g in grid_strategy([6, 6, 6]), cell in proptest::array::uniform3(0.0f64..6.0), s in 0.01f64..1.0) {
        let k = ExcitationKernel::new(1.0, 2.0, 2, 1.0, 1.0, 2e-5).unwrap();
        let mut g = g;
        // start from a normalized grid
        g = inject(&g, cell, 1e-9).unwrap();
        for _ in 0..3 {
            g = can_step(&g, &k).unwrap();
            prop_assert!((g.total() - 1.0).abs() < 1e-9);
            prop_assert!(g.activity().iter().all(|&a| a >= 0.0));
        }
        g = inject(&g, cell, s).unwrap();
        prop_assert!((g.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn heading_tracks_accumulated_rotation(steps in proptest::collection::vec(-1.5f64..1.5, 1..100), start in 0.0f64..TAU) {
        let mut hd = HeadDirectionRing::new(36, start);
        let mut sum = start;
        for d in steps {
            hd.rotate(d);
            sum += d;
            prop_assert!((0.0..TAU).contains(&hd.heading()));
            prop_assert!(hd.active_cell() < 36);
        }
        let diff = (hd.heading() - sum.rem_euclid(TAU)).abs();
        prop_assert!(diff < 1e-9 || (TAU - diff) < 1e-9);
    }

    #[test]
    fn relaxation_never_increases_residual(deltas in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -0.3f64..0.3), 2..20), close in any::<bool>()) {
        let obs = |delta: Pose, loop_match: Option<usize>| Observation { cell: [0.0; 3], template: 0, delta, loop_match, novel: true };
        let mut m = expmap_update(&ExperienceMap::new(Pose::default()), &obs(Pose::default(), None)).unwrap();
        for &(x, y, t) in &deltas {
            m = expmap_update(&m, &obs(Pose::new(x, y, t), None)).unwrap();
        }
        if close {
            m = expmap_update(&m, &obs(Pose::new(0.3, -0.2, 0.1), Some(0))).unwrap();
        }
        let mut prev = m.residual();
        for _ in 0..30 {
            m = expmap_relax(&m, 1);
            let r = m.residual();
            prop_assert!(r <= prev + 1e-9, "{} -> {}", prev, r);
            prev = r;
        }
    }

    #[test]
    fn path_planning_keeps_clear_of_obstacles(n in 2usize..8, seed in 1u16..=u16::MAX) {
        let cfg = SwarmConfig::new(Workload::Path, n, seed);
        prop_assume!(cfg.potential.d0 > 2.0 * cfg.potential.v_max);
        let params = EnergyParams::default();
        let mut world = World::from_scenario(&cfg, &Scenario::generate(&cfg).unwrap()).unwrap();
        for _ in 0..100 {
            world = workload_step(&world, &cfg, &params).unwrap().0;
        }
        let clearance = world.min_clearance().unwrap();
        prop_assert!(clearance >= cfg.collision_radius, "{}", clearance);
    }
}

#[test]
fn swarm_bitwidths_monotone() {
    let bits: Vec<u8> = (2..=20).map(|n| bitwidth_for_swarm(n).unwrap().bits()).collect();
    assert_eq!((bits[0], *bits.last().unwrap()), (3, 8));
    assert!(bits.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn workload_energy_is_sum_of_steps() {
    let params = EnergyParams::default();
    for wl in Workload::ALL {
        let cfg = SwarmConfig { stop_on_success: false, ..SwarmConfig::new(wl, 4, 0x1234) };
        let run = run_workload(&cfg, &params, 30).unwrap();
        let mut world = World::from_scenario(&cfg, &Scenario::generate(&cfg).unwrap()).unwrap();
        let mut sum = 0.0;
        for _ in 0..run.steps {
            let (next, m) = workload_step(&world, &cfg, &params).unwrap();
            world = next;
            sum += m.energy_pj;
        }
        assert_relative_eq!(sum, run.energy_pj, max_relative = 1e-12);
    }
}
