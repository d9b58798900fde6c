use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::rule::{Decision, DecisionContext, SimpleStrategy};
use super::{FrictionSpec, StrategyError};
use crate::sim::rng::path_seed;
use crate::sim::{PathBatch, TimeGrid};

/// Absolute slack, in units of the waiting time, for gap comparisons.
const GAP_TOL: f64 = 1e-9;

/// Realized rebalances of one path. Entry `j` is `(τ_j, φ_j)`; entry 0 is
/// always the initial position at `t = 0`. `φ_j` is held on `(τ_j, τ_{j+1}]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathExecution {
    pub indices: Vec<usize>,
    pub times: Vec<f64>,
    pub positions: Vec<[f64; 2]>,
    /// Set when the final position was closed by the horizon rule.
    pub liquidated: bool,
}

impl PathExecution {
    pub fn flat() -> Self {
        Self {
            indices: vec![0],
            times: vec![0.0],
            positions: vec![[0.0, 0.0]],
            liquidated: false,
        }
    }

    pub fn n_rebalances(&self) -> usize {
        self.indices.len() - 1
    }

    /// Position right after any trades at grid index `i`.
    pub fn position_after(&self, i: usize) -> [f64; 2] {
        let j = self.indices.partition_point(|&k| k <= i);
        self.positions[j.saturating_sub(1)]
    }

    /// Entries with grid index `<= i`.
    pub fn up_to(&self, i: usize) -> PathExecution {
        let n = self.indices.partition_point(|&k| k <= i);
        PathExecution {
            indices: self.indices[..n].to_vec(),
            times: self.times[..n].to_vec(),
            positions: self.positions[..n].to_vec(),
            liquidated: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyExecution {
    pub grid: TimeGrid,
    pub h: f64,
    pub paths: Vec<PathExecution>,
}

impl StrategyExecution {
    /// CSV with header `path_id,j,tau_j,phi1_j,phi2_j`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "path_id,j,tau_j,phi1_j,phi2_j")?;
        for (p, e) in self.paths.iter().enumerate() {
            for (j, (t, phi)) in e.times.iter().zip(&e.positions).enumerate() {
                writeln!(out, "{p},{j},{t},{},{}", phi[0], phi[1])?;
            }
        }
        Ok(())
    }
}

fn gap_allows(grid: &TimeGrid, from: usize, to: usize, h: f64) -> bool {
    (to - from) as f64 * grid.step + GAP_TOL * h.max(grid.step) >= h
}

/// Walks one path forward, applying the waiting-time filter to proposals.
/// Blocked proposals are dropped.
pub fn execute_path(
    strategy: &SimpleStrategy,
    grid: &TimeGrid,
    x: &[[f64; 2]],
    s: &[[f64; 2]],
    h: f64,
    path: usize,
    path_key: u64,
) -> Result<PathExecution, StrategyError> {
    let n = grid.n_points();
    if x.len() != n || s.len() != n {
        return Err(StrategyError::Mismatch(format!(
            "path has {} / {} points, grid has {n}",
            x.len(),
            s.len()
        )));
    }
    let mut exec = PathExecution::flat();
    let mut position = [0.0, 0.0];
    let mut last = 0usize;
    for i in 0..n {
        let t = grid.time(i);
        let ctx = DecisionContext {
            index: i,
            t,
            step: grid.step,
            x: &x[..=i],
            s: &s[..=i],
            position,
            last_rebalance: grid.time(last),
            rebalances: exec.n_rebalances(),
            path_key,
        };
        let Decision::Rebalance(target) = strategy.rule.decide(&ctx) else {
            continue;
        };
        if !target.iter().all(|v| v.is_finite()) {
            return Err(StrategyError::NonFinitePosition { path, t });
        }
        if target == position {
            continue;
        }
        if i == 0 {
            exec.positions[0] = target;
            position = target;
            continue;
        }
        if exec.n_rebalances() >= strategy.max_rebalances || !gap_allows(grid, last, i, h) {
            continue;
        }
        exec.indices.push(i);
        exec.times.push(t);
        exec.positions.push(target);
        position = target;
        last = i;
    }
    let end = n - 1;
    if strategy.flatten_at_horizon
        && position != [0.0, 0.0]
        && exec.n_rebalances() < strategy.max_rebalances
        && gap_allows(grid, last, end, h)
        && (end > 0 || h == 0.0)
    {
        exec.indices.push(end);
        exec.times.push(grid.time(end));
        exec.positions.push([0.0, 0.0]);
        exec.liquidated = true;
    }
    Ok(exec)
}

/// Key handed to rules for path-level randomization.
pub fn rule_key(seed: u64, path: usize) -> u64 {
    path_seed(seed, path as u64).rotate_left(23) ^ 0xa076_1d64_78bd_642f
}

pub fn execute(
    strategy: &SimpleStrategy,
    batch: &PathBatch,
    friction: &FrictionSpec,
) -> Result<StrategyExecution, StrategyError> {
    friction.validate()?;
    let prices = batch.s.as_ref().ok_or(StrategyError::MissingPrices)?;
    let n = batch.n_points();
    let paths = (0..batch.n_paths)
        .into_par_iter()
        .map(|p| {
            execute_path(
                strategy,
                &batch.grid,
                batch.x_path(p),
                &prices[p * n..(p + 1) * n],
                friction.h,
                p,
                rule_key(batch.seed, p),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StrategyExecution {
        grid: batch.grid,
        h: friction.h,
        paths,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheriditoReport {
    pub passed: bool,
    /// `(path, j)` of the first gap `τ_j − τ_{j−1} < h`.
    pub first_violation: Option<(usize, usize)>,
    pub min_gap: Option<f64>,
}

pub fn validate_cheridito(exec: &StrategyExecution, h: f64) -> CheriditoReport {
    let tol = GAP_TOL * h.max(exec.grid.step);
    let mut first_violation = None;
    let mut min_gap: Option<f64> = None;
    for (p, e) in exec.paths.iter().enumerate() {
        for j in 1..e.times.len() {
            let gap = e.times[j] - e.times[j - 1];
            min_gap = Some(min_gap.map_or(gap, |m| m.min(gap)));
            if gap + tol < h && first_violation.is_none() {
                first_violation = Some((p, j));
            }
        }
    }
    CheriditoReport {
        passed: first_violation.is_none(),
        first_violation,
        min_gap,
    }
}
