use leadlag::sim::{simulate_hry, LagModelSpec, PathBatch, TimeGrid};
use leadlag::spectral::CorrelationKernel;
use leadlag::strategy::rules::{Alternating, BuyAndHold, LagExploit, Momentum, NeverTrade, RandomRebalance, Scripted};
use leadlag::strategy::*;
use proptest::prelude::*;

fn batch_from_prices(grid: TimeGrid, paths: &[Vec<[f64; 2]>]) -> PathBatch {
    let x: Vec<[f64; 2]> = paths.iter().flatten().map(|s| [s[0].ln(), s[1].ln()]).collect();
    let b = vec![[0.0; 2]; x.len()];
    let mut batch = PathBatch::from_parts(grid, paths.len(), 0, "test".into(), b, x).unwrap();
    batch.s = Some(paths.iter().flatten().copied().collect());
    batch
}

fn simulated(n_paths: usize, seed: u64) -> PathBatch {
    let model = LagModelSpec::hry(0.1, CorrelationKernel::constant(0.9));
    simulate_hry(&model, TimeGrid::new(1.0, 0.01).unwrap(), n_paths, seed)
        .unwrap()
        .to_prices()
        .unwrap()
}

fn zoo() -> Vec<SimpleStrategy> {
    vec![
        SimpleStrategy::new(NeverTrade),
        SimpleStrategy::new(BuyAndHold { position: [1.0, -0.5] }),
        SimpleStrategy::new(Alternating { every: 3, size: 2.0 }).with_max_rebalances(7),
        SimpleStrategy::new(RandomRebalance {
            probability: 0.2,
            scale: 3.0,
        }),
        SimpleStrategy::new(LagExploit {
            lookback_steps: 10,
            interval_steps: 1,
            threshold: 0.0,
            size: 1.0,
        }),
        SimpleStrategy::new(LagExploit {
            lookback_steps: 5,
            interval_steps: 4,
            threshold: 0.05,
            size: 2.0,
        })
        .flattening(),
        SimpleStrategy::new(Momentum {
            lookback_steps: 8,
            interval_steps: 2,
            size: 1.0,
        }),
    ]
}

#[test]
fn never_trade_keeps_initial_capital() {
    let batch = simulated(5, 1);
    let exec = execute(&SimpleStrategy::new(NeverTrade), &batch, &FrictionSpec::frictionless()).unwrap();
    for e in &exec.paths {
        assert_eq!(e.positions, vec![[0.0, 0.0]]);
        assert_eq!(e.times, vec![0.0]);
    }
    let v = value_frictionless(&exec, &batch, 3.5).unwrap();
    assert!(v.values.iter().flatten().all(|&x| x == 3.5));
    let vc = value_with_costs(&exec, &batch, 0.01).unwrap();
    assert!(vc.values.iter().flatten().all(|&x| x == 0.0));
    assert!(total_variation(&exec).iter().flatten().all(|tv| *tv == [0.0, 0.0]));
}

#[test]
fn buy_and_hold() {
    let batch = simulated(5, 2);
    let exec = execute(
        &SimpleStrategy::new(BuyAndHold { position: [1.0, 0.0] }),
        &batch,
        &FrictionSpec::frictionless(),
    )
    .unwrap();
    let v = value_frictionless(&exec, &batch, 2.0).unwrap();
    let eps = 0.01;
    let vc = value_with_costs(&exec, &batch, eps).unwrap();
    for p in 0..5 {
        assert_eq!(exec.paths[p].times, vec![0.0]);
        assert_eq!(exec.paths[p].positions, vec![[1.0, 0.0]]);
        let s = batch.s_path(p).unwrap();
        let (s0, st) = (s[0][0], s.last().unwrap()[0]);
        assert!((v.values[p].last().unwrap() - (2.0 + st - s0)).abs() < 1e-12);
        let expect = (st - s0) - eps * s0 - eps * st;
        assert!((vc.values[p].last().unwrap() - expect).abs() < 1e-12);
    }
}

#[test]
fn two_step_telescoping() {
    let grid = TimeGrid::new(1.0, 0.25).unwrap();
    let s = vec![[1.0, 2.0], [1.5, 2.5], [1.2, 1.0], [0.9, 3.0], [1.1, 4.0]];
    let batch = batch_from_prices(grid, &[s.clone()]);
    let rule = Scripted {
        proposals: vec![(0, [1.0, 0.0]), (2, [0.0, 2.0])],
    };
    let exec = execute(&SimpleStrategy::new(rule), &batch, &FrictionSpec::frictionless()).unwrap();
    let v = value_frictionless(&exec, &batch, 1.0).unwrap();
    let expect = 1.0 + (s[2][0] - s[0][0]) + 2.0 * (s[4][1] - s[2][1]);
    assert!((v.values[0][4] - expect).abs() < 1e-12);
    // before the second trade only the first leg counts
    assert!((v.values[0][1] - (1.0 + s[1][0] - s[0][0])).abs() < 1e-12);
}

#[test]
fn total_variation_examples() {
    let grid = TimeGrid::new(1.0, 0.25).unwrap();
    let flat_close = PathExecution {
        indices: vec![0, 4],
        times: vec![0.0, 1.0],
        positions: vec![[1.0, 0.0], [0.0, 0.0]],
        liquidated: false,
    };
    assert_eq!(total_variation_path(&flat_close, grid.n_points())[4], [2.0, 0.0]);
    let swing = PathExecution {
        indices: vec![0, 2],
        times: vec![0.0, 0.5],
        positions: vec![[2.0, 0.0], [-1.0, 0.0]],
        liquidated: false,
    };
    let tv = total_variation_path(&swing, grid.n_points());
    assert_eq!(tv[0], [2.0, 0.0]);
    assert_eq!(tv[1], [2.0, 0.0]);
    assert_eq!(tv[4], [5.0, 0.0]);
}

#[test]
fn cheridito_filter_spaces_trades() {
    let batch = simulated(20, 3);
    let step = batch.grid.step;
    let strategy = SimpleStrategy::new(Alternating { every: 1, size: 1.0 });
    let h = 5.0 * step;
    let exec = execute(&strategy, &batch, &FrictionSpec::with_waiting_time(h)).unwrap();
    for e in &exec.paths {
        assert_eq!(e.indices.len(), 21);
        for w in e.indices.windows(2) {
            assert_eq!(w[1] - w[0], 5);
        }
    }
    assert!(validate_cheridito(&exec, h).passed);
    assert!(!validate_cheridito(&exec, 6.0 * step).passed);
}

#[test]
fn cheridito_report_examples() {
    let grid = TimeGrid::new(1.0, 0.1).unwrap();
    let mk = |times: Vec<f64>| StrategyExecution {
        grid,
        h: 0.0,
        paths: vec![PathExecution {
            indices: times.iter().map(|t| grid.index_of(*t).unwrap()).collect(),
            positions: vec![[1.0, 0.0]; times.len()],
            times,
            liquidated: false,
        }],
    };
    assert!(validate_cheridito(&mk(vec![0.0]), 0.7).passed);
    assert!(validate_cheridito(&mk(vec![0.0, 0.2, 0.4, 0.7]), 0.2).passed);
    let bad = validate_cheridito(&mk(vec![0.0, 0.2, 0.3]), 0.2);
    assert!(!bad.passed);
    assert_eq!(bad.first_violation, Some((0, 2)));
}

#[test]
fn rebalance_budget_and_non_finite_positions() {
    let batch = simulated(3, 4);
    let exec = execute(
        &SimpleStrategy::new(Alternating { every: 1, size: 1.0 }).with_max_rebalances(4),
        &batch,
        &FrictionSpec::frictionless(),
    )
    .unwrap();
    assert!(exec.paths.iter().all(|e| e.n_rebalances() == 4));
    let bad = Scripted {
        proposals: vec![(7, [f64::NAN, 0.0])],
    };
    let err = execute(&SimpleStrategy::new(bad), &batch, &FrictionSpec::frictionless()).unwrap_err();
    assert!(matches!(err, StrategyError::NonFinitePosition { path: 0, .. }));
}

#[test]
fn flattening_closes_at_horizon() {
    let batch = simulated(3, 5);
    let exec = execute(
        &SimpleStrategy::new(BuyAndHold { position: [1.0, 1.0] }).flattening(),
        &batch,
        &FrictionSpec::frictionless(),
    )
    .unwrap();
    for e in &exec.paths {
        assert!(e.liquidated);
        assert_eq!(*e.positions.last().unwrap(), [0.0, 0.0]);
        assert_eq!(*e.times.last().unwrap(), batch.grid.horizon());
    }
}

#[test]
fn admissibility_modes() {
    let grid = TimeGrid::new(1.0, 0.5).unwrap();
    let batch = batch_from_prices(grid, &[vec![[4.0, 5.0]; 3]]);
    let zero = ValuePaths {
        grid,
        values: vec![vec![0.0; 3]],
    };
    let dip = ValuePaths {
        grid,
        values: vec![vec![0.0, -5.0, 0.0]],
    };
    let mode = |admissibility| FrictionSpec {
        admissibility,
        ..FrictionSpec::frictionless()
    };
    for m in [Admissibility::Uniform { m: 0.1 }, Admissibility::NumeraireFree { m: 0.1 }] {
        assert!(check_admissible(&zero, &batch, &mode(m)).unwrap().admissible);
    }
    let r = check_admissible(&dip, &batch, &mode(Admissibility::Uniform { m: 3.0 })).unwrap();
    assert!(!r.admissible);
    assert_eq!(r.first_violation, Some((0, 0.5)));
    // 1 + S¹ + S² = 10
    let r = check_admissible(&dip, &batch, &mode(Admissibility::NumeraireFree { m: 1.0 })).unwrap();
    assert!(r.admissible);
    assert!(check_admissible(&dip, &batch, &FrictionSpec::frictionless()).is_err());
}

#[test]
fn nonpositive_price_rejected() {
    let grid = TimeGrid::new(1.0, 0.5).unwrap();
    let mut batch = batch_from_prices(grid, &[vec![[1.0, 1.0]; 3]]);
    batch.s.as_mut().unwrap()[2] = [0.0, 1.0];
    let exec = execute(&SimpleStrategy::new(NeverTrade), &batch, &FrictionSpec::frictionless()).unwrap();
    assert_eq!(
        value_with_costs(&exec, &batch, 0.01).unwrap_err(),
        StrategyError::NonPositivePrice { path: 0, index: 2 }
    );
}

#[test]
fn zero_cost_equals_frictionless_exactly() {
    let batch = simulated(50, 6);
    for strategy in zoo() {
        let exec = execute(&strategy, &batch, &FrictionSpec::frictionless()).unwrap();
        let a = value_frictionless(&exec, &batch, 0.0).unwrap();
        let b = value_with_costs(&exec, &batch, 0.0).unwrap();
        assert_eq!(a, b, "{}", strategy.name());
    }
}

#[test]
fn filter_then_validate_is_idempotent() {
    let batch = simulated(30, 7);
    for h in [0.0, 0.01, 0.03, 0.05, 0.2] {
        for strategy in zoo() {
            let exec = execute(&strategy, &batch, &FrictionSpec::with_waiting_time(h)).unwrap();
            assert!(validate_cheridito(&exec, h).passed, "{} h={h}", strategy.name());
        }
    }
}

/// Replaces everything after index `k` on path `p` with fresh noise.
fn surgery(batch: &PathBatch, p: usize, k: usize, salt: u64) -> PathBatch {
    let mut out = batch.clone();
    let n = batch.n_points();
    let s = out.s.as_mut().unwrap();
    let mut z = salt;
    for i in k + 1..n {
        for nu in 0..2 {
            z = z.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = (z >> 11) as f64 / (1u64 << 53) as f64;
            out.x[p * n + i][nu] += 3.0 * (u - 0.5);
            s[p * n + i][nu] = out.x[p * n + i][nu].exp();
        }
    }
    out
}

#[test]
fn decisions_are_adapted_under_path_surgery() {
    let batch = simulated(10, 8);
    let friction = FrictionSpec::with_waiting_time(0.02);
    let zoo = zoo();
    for trial in 0..200u64 {
        let strategy = &zoo[trial as usize % zoo.len()];
        let p = (trial as usize * 7) % batch.n_paths;
        let k = (trial as usize * 37) % batch.grid.n_steps;
        let cut = surgery(&batch, p, k, trial);
        let a = execute(strategy, &batch, &friction).unwrap();
        let b = execute(strategy, &cut, &friction).unwrap();
        assert_eq!(a.paths[p].up_to(k), b.paths[p].up_to(k), "{} trial {trial}", strategy.name());
        // Value plus liquidation term is a function of the history only.
        let eps = 0.005;
        let va = value_with_costs(&a, &batch, eps).unwrap();
        let vb = value_with_costs(&b, &cut, eps).unwrap();
        for i in 0..=k {
            let lift = |e: &PathExecution, s: &[[f64; 2]]| {
                let pos = e.position_after(i);
                eps * (pos[0].abs() * s[i][0] + pos[1].abs() * s[i][1])
            };
            let ua = va.values[p][i] + lift(&a.paths[p], batch.s_path(p).unwrap());
            let ub = vb.values[p][i] + lift(&b.paths[p], cut.s_path(p).unwrap());
            assert!((ua - ub).abs() < 1e-12);
        }
    }
}

#[test]
fn csv_exports() {
    let batch = simulated(2, 9);
    let exec = execute(
        &SimpleStrategy::new(Alternating { every: 50, size: 1.0 }),
        &batch,
        &FrictionSpec::frictionless(),
    )
    .unwrap();
    let mut buf = Vec::new();
    exec.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "path_id,j,tau_j,phi1_j,phi2_j");
    assert_eq!(text.lines().nth(2).unwrap(), "0,1,0.5,-1,0");
    let v = value_frictionless(&exec, &batch, 0.0).unwrap();
    let mut buf = Vec::new();
    v.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "path_id,t,V");
    assert_eq!(text.lines().count(), 1 + 2 * 101);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn terminal_value_nonincreasing_in_epsilon(
        seed in 0u64..1000,
        prob in 0.01f64..0.5,
        e1 in 0.0f64..0.05,
        de in 0.0f64..0.05,
    ) {
        let batch = simulated(4, seed);
        let strategy = SimpleStrategy::new(RandomRebalance { probability: prob, scale: 2.0 });
        let exec = execute(&strategy, &batch, &FrictionSpec::frictionless()).unwrap();
        let lo = value_with_costs(&exec, &batch, e1).unwrap().terminal();
        let hi = value_with_costs(&exec, &batch, e1 + de).unwrap().terminal();
        for (a, b) in lo.iter().zip(&hi) {
            prop_assert!(b <= a);
        }
    }

    #[test]
    fn random_executions_are_well_formed(seed in 0u64..1000, h in 0.0f64..0.3) {
        let batch = simulated(3, seed);
        let strategy = SimpleStrategy::new(RandomRebalance { probability: 0.3, scale: 1.0 });
        let exec = execute(&strategy, &batch, &FrictionSpec::with_waiting_time(h)).unwrap();
        for e in &exec.paths {
            prop_assert!(e.times.windows(2).all(|w| w[1] >= w[0]));
            prop_assert!(*e.times.last().unwrap() <= batch.grid.horizon());
            prop_assert!(e.positions.iter().flatten().all(|v| v.is_finite()));
        }
    }
}
