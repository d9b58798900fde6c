//! Value processes of simple strategies.
//!
//! Evaluation at a grid time is after any trade at that time: the cost of
//! a rebalance at `τ_j` is already charged at `τ_j`, and the liquidation
//! term uses the position held from `τ_j` on.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::execute::{PathExecution, StrategyExecution};
use super::{Admissibility, FrictionSpec, StrategyError};
use crate::sim::{PathBatch, TimeGrid};

fn dot_diff(phi: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    phi[0] * (a[0] - b[0]) + phi[1] * (a[1] - b[1])
}

/// Telescoping gains `∑_j φ_j·(S_{t∧τ_{j+1}} − S_{t∧τ_j})` at every grid
/// index, the last position held to the horizon.
pub fn gains_path(exec: &PathExecution, s: &[[f64; 2]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(s.len());
    let mut closed = 0.0;
    let mut j = 0;
    for i in 0..s.len() {
        while j + 1 < exec.indices.len() && exec.indices[j + 1] <= i {
            closed += dot_diff(exec.positions[j], s[exec.indices[j + 1]], s[exec.indices[j]]);
            j += 1;
        }
        out.push(closed + dot_diff(exec.positions[j], s[i], s[exec.indices[j]]));
    }
    out
}

pub fn value_frictionless_path(exec: &PathExecution, s: &[[f64; 2]], v: f64) -> Vec<f64> {
    gains_path(exec, s).into_iter().map(|g| v + g).collect()
}

/// Running total variation per component, including the jump from flat to
/// `φ_0` at time 0.
pub fn total_variation_path(exec: &PathExecution, n_points: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(n_points);
    let mut tv = [0.0, 0.0];
    let mut prev = [0.0, 0.0];
    let mut j = 0;
    for i in 0..n_points {
        while j < exec.indices.len() && exec.indices[j] <= i {
            let phi = exec.positions[j];
            tv[0] += (phi[0] - prev[0]).abs();
            tv[1] += (phi[1] - prev[1]).abs();
            prev = phi;
            j += 1;
        }
        out.push(tv);
    }
    out
}

/// `V^ε_t = ∫Φ dS − ε∫S dTV(Φ) − ε∑|Φ_t| S_t` at every grid index.
pub fn value_with_costs_path(exec: &PathExecution, s: &[[f64; 2]], epsilon: f64) -> Result<Vec<f64>, usize> {
    if let Some(i) = s.iter().position(|v| !(v[0] > 0.0 && v[1] > 0.0)) {
        return Err(i);
    }
    let gains = gains_path(exec, s);
    let mut out = Vec::with_capacity(s.len());
    let mut cost = 0.0;
    let mut prev = [0.0, 0.0];
    let mut j = 0;
    for (i, g) in gains.into_iter().enumerate() {
        while j < exec.indices.len() && exec.indices[j] <= i {
            let phi = exec.positions[j];
            let p = s[exec.indices[j]];
            cost += epsilon * (p[0] * (phi[0] - prev[0]).abs() + p[1] * (phi[1] - prev[1]).abs());
            prev = phi;
            j += 1;
        }
        let liquidation = epsilon * (prev[0].abs() * s[i][0] + prev[1].abs() * s[i][1]);
        out.push(g - cost - liquidation);
    }
    Ok(out)
}

/// Value paths, one per simulated path, sampled on the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValuePaths {
    pub grid: TimeGrid,
    pub values: Vec<Vec<f64>>,
}

impl ValuePaths {
    pub fn terminal(&self) -> Vec<f64> {
        self.values.iter().map(|v| *v.last().expect("nonempty path")).collect()
    }

    /// CSV with header `path_id,t,V`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "path_id,t,V")?;
        for (p, v) in self.values.iter().enumerate() {
            for (i, value) in v.iter().enumerate() {
                writeln!(out, "{p},{},{value}", self.grid.time(i))?;
            }
        }
        Ok(())
    }
}

fn prices_for<'a>(exec: &StrategyExecution, batch: &'a PathBatch) -> Result<&'a [[f64; 2]], StrategyError> {
    if exec.paths.len() != batch.n_paths || exec.grid != batch.grid {
        return Err(StrategyError::Mismatch(format!(
            "{} executions on {:?}, batch has {} paths on {:?}",
            exec.paths.len(),
            exec.grid,
            batch.n_paths,
            batch.grid
        )));
    }
    batch.s.as_deref().ok_or(StrategyError::MissingPrices)
}

pub fn value_frictionless(exec: &StrategyExecution, batch: &PathBatch, v: f64) -> Result<ValuePaths, StrategyError> {
    let prices = prices_for(exec, batch)?;
    let n = batch.n_points();
    let values = exec
        .paths
        .par_iter()
        .enumerate()
        .map(|(p, e)| value_frictionless_path(e, &prices[p * n..(p + 1) * n], v))
        .collect();
    Ok(ValuePaths { grid: batch.grid, values })
}

pub fn value_with_costs(exec: &StrategyExecution, batch: &PathBatch, epsilon: f64) -> Result<ValuePaths, StrategyError> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(StrategyError::InvalidFriction(format!("epsilon={epsilon}")));
    }
    let prices = prices_for(exec, batch)?;
    let n = batch.n_points();
    let values = exec
        .paths
        .par_iter()
        .enumerate()
        .map(|(p, e)| {
            value_with_costs_path(e, &prices[p * n..(p + 1) * n], epsilon)
                .map_err(|index| StrategyError::NonPositivePrice { path: p, index })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ValuePaths { grid: batch.grid, values })
}

pub fn total_variation(exec: &StrategyExecution) -> Vec<Vec<[f64; 2]>> {
    let n = exec.grid.n_points();
    exec.paths.iter().map(|e| total_variation_path(e, n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    /// `(path, t)` of the first violation, scanning paths in order.
    pub first_violation: Option<(usize, f64)>,
}

/// Index of the first grid time where the bound fails.
pub fn check_admissible_path(values: &[f64], s: &[[f64; 2]], mode: Admissibility) -> Option<usize> {
    values.iter().zip(s).position(|(v, p)| match mode {
        Admissibility::None => false,
        Admissibility::Uniform { m } => *v < -m,
        Admissibility::NumeraireFree { m } => *v < -m * (1.0 + p[0] + p[1]),
    })
}

pub fn check_admissible(
    values: &ValuePaths,
    batch: &PathBatch,
    friction: &FrictionSpec,
) -> Result<AdmissibilityReport, StrategyError> {
    friction.validate()?;
    if friction.admissibility == Admissibility::None {
        return Err(StrategyError::InvalidFriction("admissibility mode is none".into()));
    }
    let prices = batch.s.as_deref().ok_or(StrategyError::MissingPrices)?;
    let n = batch.n_points();
    let first_violation = values.values.iter().enumerate().find_map(|(p, v)| {
        check_admissible_path(v, &prices[p * n..(p + 1) * n], friction.admissibility).map(|i| (p, batch.grid.time(i)))
    });
    Ok(AdmissibilityReport {
        admissible: first_violation.is_none(),
        first_violation,
    })
}
