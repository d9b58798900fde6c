//! Per-path synthesis of `(B, X)` on a uniform grid.
//!
//! Each path is produced from its own substreams only, so any path can be
//! regenerated in isolation and batches are identical for any worker count.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::batch::PathBatch;
use super::grid::{steps_in, TimeGrid};
use super::model::{DriftSpec, LagModelSpec, LagStructure};
use super::rng::{substream, Substream};
use super::SimError;
use crate::spectral::{increment_cross_cov, CrossSpectralDensity};

/// Eigenvalues more negative than this fraction of the largest abort the
/// embedding; smaller negatives are clipped to zero.
pub const EIGEN_CLIP_REL: f64 = 1e-10;

/// One simulated path: the Brownian pair and the log-prices.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub b: Vec<[f64; 2]>,
    pub x: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
struct HryPlan {
    lag_steps: usize,
    /// Cell averages of rho on `[mΔ, (m+1)Δ)`.
    rho_cells: Vec<f64>,
}

#[derive(Clone)]
struct SpectralPlan {
    fft_len: usize,
    /// Lower-triangular factor of each 2×2 spectral matrix:
    /// `[[a11, 0], [a21, a22]]`.
    factors: Vec<(f64, Complex64, f64)>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan").field("fft_len", &self.fft_len).finish()
    }
}

#[derive(Debug, Clone)]
enum Plan {
    Hry(HryPlan),
    Spectral(SpectralPlan),
}

/// Embedding diagnostics of the spectral synthesis.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EmbeddingStats {
    pub fft_len: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub clipped: usize,
}

#[derive(Debug, Clone)]
pub struct PathGenerator {
    model: LagModelSpec,
    grid: TimeGrid,
    seed: u64,
    model_hash: String,
    plan: Plan,
    embedding: Option<EmbeddingStats>,
}

impl PathGenerator {
    pub fn new(model: &LagModelSpec, grid: TimeGrid, seed: u64) -> Result<Self, SimError> {
        model.validate()?;
        if grid.n_steps == 0 || !(grid.step > 0.0) {
            return Err(SimError::InvalidGrid("grid needs at least one step".into()));
        }
        let (plan, embedding) = match &model.lag {
            LagStructure::Hry { theta, rho } => {
                let lag_steps = steps_in(*theta, grid.step).ok_or(SimError::GridMismatch {
                    theta: *theta,
                    step: grid.step,
                })?;
                let rho_cells = (0..grid.n_steps)
                    .map(|m| rho.average(m as f64 * grid.step, (m + 1) as f64 * grid.step))
                    .collect::<Result<Vec<_>, _>>()?;
                (Plan::Hry(HryPlan { lag_steps, rho_cells }), None)
            }
            LagStructure::Spectral { density } => {
                let (plan, stats) = spectral_plan(density, grid)?;
                (Plan::Spectral(plan), Some(stats))
            }
        };
        Ok(Self {
            model: model.clone(),
            grid,
            seed,
            model_hash: model.model_hash(),
            plan,
            embedding,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn model(&self) -> &LagModelSpec {
        &self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model_hash(&self) -> &str {
        &self.model_hash
    }

    pub fn embedding_stats(&self) -> Option<EmbeddingStats> {
        self.embedding
    }

    /// Brownian increments of one path, `n_steps` pairs.
    pub fn brownian_increments(&self, path: u64) -> Vec<[f64; 2]> {
        match &self.plan {
            Plan::Hry(p) => self.hry_increments(p, path),
            Plan::Spectral(p) => self.spectral_increments(p, path),
        }
    }

    fn hry_increments(&self, plan: &HryPlan, path: u64) -> Vec<[f64; 2]> {
        let n = self.grid.n_steps;
        let sd = self.grid.step.sqrt();
        let lag = plan.lag_steps.min(n);
        let draw = |stream: Substream, count: usize| -> Vec<f64> {
            let mut rng = substream(self.seed, path, stream);
            (0..count).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
        };
        let w0 = draw(Substream::W0, lag);
        let w1 = draw(Substream::W1, n);
        let w2 = draw(Substream::W2, n);
        let w3 = draw(Substream::W3, n - lag);
        let mut out = Vec::with_capacity(n);
        for m in 0..n {
            let r = plan.rho_cells[m];
            let a = r.abs();
            let db1 = r.signum() * a.sqrt() * w1[m] + (1.0 - a).sqrt() * w2[m];
            let db2 = if m < lag {
                w0[m]
            } else {
                let u = m - lag;
                let au = plan.rho_cells[u].abs();
                au.sqrt() * w1[u] + (1.0 - au).sqrt() * w3[u]
            };
            out.push([db1, db2]);
        }
        out
    }

    fn spectral_increments(&self, plan: &SpectralPlan, path: u64) -> Vec<[f64; 2]> {
        let m = plan.fft_len;
        let mut rng1 = substream(self.seed, path, Substream::W0);
        let mut rng2 = substream(self.seed, path, Substream::W1);
        let mut y1 = Vec::with_capacity(m);
        let mut y2 = Vec::with_capacity(m);
        for &(a11, a21, a22) in &plan.factors {
            let z1 = Complex64::new(rng1.sample(StandardNormal), rng1.sample(StandardNormal));
            let z2 = Complex64::new(rng2.sample(StandardNormal), rng2.sample(StandardNormal));
            y1.push(z1 * a11);
            y2.push(a21 * z1 + z2 * a22);
        }
        plan.inverse.process(&mut y1);
        plan.inverse.process(&mut y2);
        let scale = 1.0 / (m as f64).sqrt();
        (0..self.grid.n_steps)
            .map(|i| [y1[i].re * scale, y2[i].re * scale])
            .collect()
    }

    fn drift_increments(&self, path: u64) -> Option<Vec<[f64; 2]>> {
        let n = self.grid.n_steps;
        let dt = self.grid.step;
        match self.model.drift {
            DriftSpec::Zero => None,
            DriftSpec::Linear { mu } => Some(vec![[mu[0] * dt, mu[1] * dt]; n]),
            DriftSpec::IndependentGaussian { scale, rho } => {
                let mut rng = substream(self.seed, path, Substream::Drift);
                let sd = dt.sqrt();
                let c = (1.0 - rho * rho).max(0.0).sqrt();
                Some(
                    (0..n)
                        .map(|_| {
                            let z1: f64 = rng.sample(StandardNormal);
                            let z2: f64 = rng.sample(StandardNormal);
                            [scale[0] * sd * z1, scale[1] * sd * (rho * z1 + c * z2)]
                        })
                        .collect(),
                )
            }
        }
    }

    pub fn generate(&self, path: u64) -> SimPath {
        let db = self.brownian_increments(path);
        let da = self.drift_increments(path);
        let n = self.grid.n_steps;
        let mut b = Vec::with_capacity(n + 1);
        let mut x = Vec::with_capacity(n + 1);
        b.push([0.0, 0.0]);
        x.push([0.0, 0.0]);
        let (mut bc, mut xc) = ([0.0f64; 2], [0.0f64; 2]);
        for (m, inc) in db.iter().enumerate() {
            let t = self.grid.time(m);
            for nu in 0..2 {
                bc[nu] += inc[nu];
                xc[nu] += self.model.sigma(nu).at(t) * inc[nu];
                if let Some(da) = &da {
                    xc[nu] += da[m][nu];
                }
            }
            b.push(bc);
            x.push(xc);
        }
        SimPath { b, x }
    }

    /// Drift path `A` of one path (zeros for the zero drift).
    pub fn drift_path(&self, path: u64) -> Vec<[f64; 2]> {
        let mut acc = [0.0f64; 2];
        let mut out = vec![acc];
        match self.drift_increments(path) {
            Some(inc) => {
                for d in inc {
                    acc[0] += d[0];
                    acc[1] += d[1];
                    out.push(acc);
                }
            }
            None => out.resize(self.grid.n_points(), acc),
        }
        out
    }

    /// Materializes `n_paths` paths, in parallel across path indices.
    pub fn batch(&self, n_paths: usize) -> Result<PathBatch, SimError> {
        if n_paths == 0 {
            return Err(SimError::InvalidRequest("n_paths must be >= 1".into()));
        }
        let paths: Vec<SimPath> = (0..n_paths as u64).into_par_iter().map(|p| self.generate(p)).collect();
        let points = self.grid.n_points();
        let mut b = Vec::with_capacity(points * n_paths);
        let mut x = Vec::with_capacity(points * n_paths);
        for p in paths {
            b.extend_from_slice(&p.b);
            x.extend_from_slice(&p.x);
        }
        PathBatch::from_parts(self.grid, n_paths, self.seed, self.model_hash.clone(), b, x)
    }
}

fn spectral_plan(density: &CrossSpectralDensity, grid: TimeGrid) -> Result<(SpectralPlan, EmbeddingStats), SimError> {
    let n = grid.n_steps;
    let m = (2 * n).next_power_of_two();
    let half = m / 2;
    let step = grid.step;
    // gamma[k + half] = E[ΔB¹_j ΔB²_{j+k}], k in -half..=half
    let gamma = (-(half as i64)..=half as i64)
        .map(|k| increment_cross_cov(density, step, k))
        .collect::<Result<Vec<_>, _>>()?;
    let g = |k: i64| gamma[(k + half as i64) as usize];
    // Circulant first row: c12(k) = Cov(ΔB¹_{j+k}, ΔB²_j) = γ12(−k).
    let mut c12: Vec<Complex64> = (0..m)
        .map(|j| {
            let k = if j <= half { j as i64 } else { j as i64 - m as i64 };
            Complex64::new(g(-k), 0.0)
        })
        .collect();
    c12[half] = Complex64::new(0.5 * (g(half as i64) + g(-(half as i64))), 0.0);

    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut c12);
    let inverse = planner.plan_fft_inverse(m);

    let mut factors = Vec::with_capacity(m);
    let mut min_eig = f64::INFINITY;
    let mut max_eig: f64 = 0.0;
    let mut clipped = 0;
    for s in &c12 {
        min_eig = min_eig.min(step - s.norm());
        max_eig = max_eig.max(step + s.norm());
    }
    for s in c12 {
        let mut s = s;
        let lo = step - s.norm();
        if lo < 0.0 {
            if -lo > EIGEN_CLIP_REL * max_eig {
                return Err(SimError::EmbeddingFailure {
                    min_eigenvalue: min_eig,
                    max_eigenvalue: max_eig,
                });
            }
            s *= step / s.norm();
            clipped += 1;
        }
        let a11 = step.sqrt();
        let a21 = s.conj() / a11;
        let a22 = (step - s.norm_sqr() / step).max(0.0).sqrt();
        factors.push((a11, a21, a22));
    }
    Ok((
        SpectralPlan {
            fft_len: m,
            factors,
            inverse,
        },
        EmbeddingStats {
            fft_len: m,
            min_eigenvalue: min_eig,
            max_eigenvalue: max_eig,
            clipped,
        },
    ))
}

/// Simulates the explicit lagged realization.
pub fn simulate_hry(model: &LagModelSpec, grid: TimeGrid, n_paths: usize, seed: u64) -> Result<PathBatch, SimError> {
    if !matches!(model.lag, LagStructure::Hry { .. }) {
        return Err(SimError::WrongForm("simulate_hry needs an hry model"));
    }
    PathGenerator::new(model, grid, seed)?.batch(n_paths)
}

/// Simulates a stationary-increment pair by circulant embedding.
pub fn simulate_spectral(model: &LagModelSpec, grid: TimeGrid, n_paths: usize, seed: u64) -> Result<PathBatch, SimError> {
    if !matches!(model.lag, LagStructure::Spectral { .. }) {
        return Err(SimError::WrongForm("simulate_spectral needs a spectral model"));
    }
    PathGenerator::new(model, grid, seed)?.batch(n_paths)
}
