//! Monte Carlo arbitrage experiments.
//!
//! Paths are generated one at a time from their own substreams and only the
//! terminal values are kept, so memory does not grow with the grid. The
//! reduction runs over path indices in order, which makes the statistics
//! independent of the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::ArbStats;
use super::LabError;
use crate::sim::rng::path_seed;
use crate::sim::{LagModelSpec, PathGenerator, TimeGrid};
use crate::strategy::rules::{LagExploit, RandomRebalance};
use crate::strategy::{
    execute_path, rule_key, value_frictionless_path, value_with_costs_path, FrictionSpec, SimpleStrategy,
};

pub const DISCLAIMER: &str = "Monte Carlo evidence only: a loss fraction bounded away from zero rules out \
     arbitrage for the strategies tried, and says nothing about strategies outside the suite.";

/// Follower trades on the leader's recent move. Times are in model units
/// and must be multiples of the grid step.
pub fn make_lag_exploit_rule(
    lookback: f64,
    entry_threshold: f64,
    trade_interval: f64,
    position_size: f64,
    grid: &TimeGrid,
) -> Result<SimpleStrategy, LabError> {
    let steps = |name: &str, v: f64| -> Result<usize, LabError> {
        match crate::sim::grid::steps_in(v, grid.step) {
            Some(n) if n > 0 => Ok(n),
            _ => Err(LabError::InvalidParameter(format!(
                "{name}={v} must be a positive multiple of the grid step {}",
                grid.step
            ))),
        }
    };
    if entry_threshold.is_nan() || entry_threshold < 0.0 || !position_size.is_finite() {
        return Err(LabError::InvalidParameter(format!(
            "entry_threshold={entry_threshold}, position_size={position_size}"
        )));
    }
    Ok(SimpleStrategy::new(LagExploit {
        lookback_steps: steps("lookback", lookback)?,
        interval_steps: steps("trade_interval", trade_interval)?,
        threshold: entry_threshold,
        size: position_size,
    }))
}

pub fn make_random_rebalance_rule(probability: f64, scale: f64) -> Result<SimpleStrategy, LabError> {
    if !(0.0..=1.0).contains(&probability) || !(scale.is_finite() && scale >= 0.0) {
        return Err(LabError::InvalidParameter(format!(
            "probability={probability}, scale={scale}"
        )));
    }
    Ok(SimpleStrategy::new(RandomRebalance { probability, scale }))
}

/// Strategies run against every friction setting: the exploit rule at
/// several settings and a random rebalancer.
pub fn default_strategy_suite(grid: &TimeGrid) -> Result<Vec<SimpleStrategy>, LabError> {
    let dt = grid.step;
    let at = |steps: f64| steps * dt;
    Ok(vec![
        make_lag_exploit_rule(at(10.0), 0.0, at(1.0), 1.0, grid)?,
        make_lag_exploit_rule(at(5.0), 0.0, at(1.0), 1.0, grid)?,
        make_lag_exploit_rule(at(10.0), 0.05, at(2.0), 2.0, grid)?,
        make_random_rebalance_rule(0.05, 1.0)?,
    ])
}

/// Terminal values per path (outer) and per cost rate (inner).
pub fn terminal_values(
    model: &LagModelSpec,
    strategy: &SimpleStrategy,
    h: f64,
    epsilons: &[f64],
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, LabError> {
    if n_paths == 0 {
        return Err(LabError::InvalidParameter("n_paths must be >= 1".into()));
    }
    for &eps in epsilons {
        FrictionSpec {
            h,
            epsilon: eps,
            ..FrictionSpec::frictionless()
        }
        .validate()?;
    }
    let generator = PathGenerator::new(model, grid, seed)?;
    (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let path = generator.generate(p as u64);
            let s = super::prices(&path.x, p)?;
            let exec = execute_path(strategy, &grid, &path.x, &s, h, p, rule_key(seed, p))?;
            Ok(epsilons
                .iter()
                .map(|&eps| {
                    let v = if eps == 0.0 {
                        value_frictionless_path(&exec, &s, 0.0)
                    } else {
                        value_with_costs_path(&exec, &s, eps).expect("prices are positive")
                    };
                    *v.last().expect("nonempty")
                })
                .collect())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub model_hash: String,
    pub grid: TimeGrid,
    pub n_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub strategy: String,
    pub friction: FrictionSpec,
    pub provenance: Provenance,
    pub stats: ArbStats,
    pub disclaimer: String,
}

pub fn run_experiment(
    model: &LagModelSpec,
    strategy: &SimpleStrategy,
    friction: &FrictionSpec,
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<ExperimentReport, LabError> {
    friction.validate()?;
    let values: Vec<f64> = terminal_values(model, strategy, friction.h, &[friction.epsilon], grid, n_paths, seed)?
        .into_iter()
        .map(|v| v[0])
        .collect();
    Ok(ExperimentReport {
        strategy: strategy.name(),
        friction: *friction,
        provenance: Provenance {
            seed,
            model_hash: model.model_hash(),
            grid,
            n_paths,
        },
        stats: ArbStats::from_terminal(&values),
        disclaimer: DISCLAIMER.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSweepReport {
    pub strategy: String,
    pub h: f64,
    pub epsilons: Vec<f64>,
    pub provenance: Provenance,
    pub stats: Vec<ArbStats>,
    /// Every path's terminal value is nonincreasing along the sweep.
    pub pathwise_monotone: bool,
    pub disclaimer: String,
}

/// Same paths and executions, valued at each cost rate.
pub fn run_cost_sweep(
    model: &LagModelSpec,
    strategy: &SimpleStrategy,
    h: f64,
    epsilons: &[f64],
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<CostSweepReport, LabError> {
    if epsilons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::InvalidParameter("epsilons must be strictly increasing".into()));
    }
    let values = terminal_values(model, strategy, h, epsilons, grid, n_paths, seed)?;
    let pathwise_monotone = values.iter().all(|v| v.windows(2).all(|w| w[1] <= w[0]));
    let stats = (0..epsilons.len())
        .map(|k| ArbStats::from_terminal(&values.iter().map(|v| v[k]).collect::<Vec<_>>()))
        .collect();
    Ok(CostSweepReport {
        strategy: strategy.name(),
        h,
        epsilons: epsilons.to_vec(),
        provenance: Provenance {
            seed,
            model_hash: model.model_hash(),
            grid,
            n_paths,
        },
        stats,
        pathwise_monotone,
        disclaimer: DISCLAIMER.into(),
    })
}

/// Seed for the `k`-th experiment derived from a master seed.
pub fn derived_seed(master: u64, k: u64) -> u64 {
    path_seed(master ^ 0x6a09_e667_f3bc_c909, k)
}
