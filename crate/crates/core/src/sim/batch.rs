use std::io::Write;

use serde::Serialize;

use super::grid::TimeGrid;
use super::SimError;

/// Materialized paths. Arrays are path-major: entry `(p, i)` lives at
/// `p * n_points + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub seed: u64,
    pub model_hash: String,
    /// Brownian pair `(B¹, B²)`.
    pub b: Vec<[f64; 2]>,
    /// Log-prices `(X¹, X²)`.
    pub x: Vec<[f64; 2]>,
    /// Prices `(S¹, S²)`, filled by [`PathBatch::to_prices`].
    pub s: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchMetadata<'a> {
    pub model_hash: &'a str,
    pub seed: u64,
    pub n_paths: usize,
    pub t_start: f64,
    pub step: f64,
    pub n_steps: usize,
    pub has_prices: bool,
}

/// Which components enter an empirical covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentPair(pub usize, pub usize);

impl ComponentPair {
    pub const CROSS: Self = Self(0, 1);
}

impl PathBatch {
    pub fn from_parts(
        grid: TimeGrid,
        n_paths: usize,
        seed: u64,
        model_hash: String,
        b: Vec<[f64; 2]>,
        x: Vec<[f64; 2]>,
    ) -> Result<Self, SimError> {
        let len = grid.n_points() * n_paths;
        if b.len() != len || x.len() != len {
            return Err(SimError::InvalidRequest(format!(
                "expected {len} samples, got b={} x={}",
                b.len(),
                x.len()
            )));
        }
        if x.iter().chain(&b).any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(SimError::InvalidRequest("non-finite path values".into()));
        }
        Ok(Self {
            grid,
            n_paths,
            seed,
            model_hash,
            b,
            x,
            s: None,
        })
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_points()
    }

    pub fn b_path(&self, p: usize) -> &[[f64; 2]] {
        let n = self.n_points();
        &self.b[p * n..(p + 1) * n]
    }

    pub fn x_path(&self, p: usize) -> &[[f64; 2]] {
        let n = self.n_points();
        &self.x[p * n..(p + 1) * n]
    }

    pub fn s_path(&self, p: usize) -> Option<&[[f64; 2]]> {
        let n = self.n_points();
        self.s.as_ref().map(|s| &s[p * n..(p + 1) * n])
    }

    /// Adds `S = exp(X)` componentwise.
    pub fn to_prices(mut self) -> Result<Self, SimError> {
        let n = self.n_points();
        let mut s = Vec::with_capacity(self.x.len());
        for (k, v) in self.x.iter().enumerate() {
            let e = [v[0].exp(), v[1].exp()];
            if !e[0].is_finite() || !e[1].is_finite() || e[0] <= 0.0 || e[1] <= 0.0 {
                return Err(SimError::PriceOverflow {
                    path: k / n,
                    index: k % n,
                });
            }
            s.push(e);
        }
        self.s = Some(s);
        Ok(self)
    }

    /// Sample mean and standard error of `B^i_t · B^j_s` across paths.
    pub fn empirical_cross_cov(&self, t: f64, s: f64, pair: ComponentPair) -> Result<(f64, f64), SimError> {
        let it = self.grid.index_of(t)?;
        let is = self.grid.index_of(s)?;
        if pair.0 > 1 || pair.1 > 1 {
            return Err(SimError::InvalidRequest("components are 0 and 1".into()));
        }
        let samples: Vec<f64> = (0..self.n_paths)
            .map(|p| {
                let path = self.b_path(p);
                path[it][pair.0] * path[is][pair.1]
            })
            .collect();
        Ok(mean_and_stderr(&samples))
    }

    /// CSV with header `path_id,t,X1,X2[,S1,S2]`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let with_prices = self.s.is_some();
        if with_prices {
            writeln!(out, "path_id,t,X1,X2,S1,S2")?;
        } else {
            writeln!(out, "path_id,t,X1,X2")?;
        }
        for p in 0..self.n_paths {
            let x = self.x_path(p);
            let s = self.s_path(p);
            for (i, xi) in x.iter().enumerate() {
                let t = self.grid.time(i);
                match s {
                    Some(s) => writeln!(out, "{p},{t},{},{},{},{}", xi[0], xi[1], s[i][0], s[i][1])?,
                    None => writeln!(out, "{p},{t},{},{}", xi[0], xi[1])?,
                }
            }
        }
        Ok(())
    }

    pub fn metadata(&self) -> BatchMetadata<'_> {
        BatchMetadata {
            model_hash: &self.model_hash,
            seed: self.seed,
            n_paths: self.n_paths,
            t_start: self.grid.t_start,
            step: self.grid.step,
            n_steps: self.grid.n_steps,
            has_prices: self.s.is_some(),
        }
    }

    pub fn metadata_json(&self) -> String {
        serde_json::to_string_pretty(&self.metadata()).expect("metadata serializes")
    }
}

/// Sample mean and standard error (`sd / √n`, with `n − 1` normalization).
pub fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
