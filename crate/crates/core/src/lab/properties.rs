//! Monte Carlo checks of small-ball, stickiness and sign-pattern properties.
//!
//! Distances in `ℝ²` use the max-norm. Probabilities are estimated from
//! unconditional paths on the window `[t0, T]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::Proportion;
use super::LabError;
use crate::sim::{DriftSpec, LagModelSpec, PathGenerator, TimeGrid};

/// Increments smaller than this count as ties.
pub const TIE_TOL: f64 = 1e-14;

/// How the supremum over `[t0, T]` is approximated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Monitoring {
    /// Maximum over grid times only.
    #[default]
    Grid,
    /// Grid check times the probability that Brownian bridges between grid
    /// points stay inside the band, each component on its own.
    BrownianBridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallBallQuery {
    pub t0: f64,
    /// Target sampled at grid times `t0, t0 + Δ, …, T`; first entry zero.
    pub target: Vec<[f64; 2]>,
    pub eps: f64,
    /// Components entering the norm.
    #[serde(default = "both")]
    pub components: Vec<usize>,
    #[serde(default)]
    pub monitoring: Monitoring,
}

fn both() -> Vec<usize> {
    vec![0, 1]
}

impl SmallBallQuery {
    /// Target identically zero on `[t0, T]`.
    pub fn zero_target(t0: f64, eps: f64, grid: &TimeGrid) -> Result<Self, LabError> {
        let i0 = grid.index_of(t0)?;
        Ok(Self {
            t0,
            target: vec![[0.0, 0.0]; grid.n_points() - i0],
            eps,
            components: both(),
            monitoring: Monitoring::Grid,
        })
    }

    pub fn with_components(mut self, components: Vec<usize>) -> Self {
        self.components = components;
        self
    }

    pub fn with_monitoring(mut self, monitoring: Monitoring) -> Self {
        self.monitoring = monitoring;
        self
    }

    fn validate(&self, grid: &TimeGrid) -> Result<usize, LabError> {
        let i0 = grid.index_of(self.t0)?;
        if i0 >= grid.n_steps {
            return Err(LabError::InvalidParameter(format!("t0={} must be before the horizon", self.t0)));
        }
        if !(self.eps > 0.0) {
            return Err(LabError::InvalidParameter(format!("eps={} must be positive", self.eps)));
        }
        if self.target.len() != grid.n_points() - i0 {
            return Err(LabError::InvalidParameter(format!(
                "target has {} samples, window has {}",
                self.target.len(),
                grid.n_points() - i0
            )));
        }
        if self.target[0] != [0.0, 0.0] || self.target.iter().flatten().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidParameter("target must start at 0 and be finite".into()));
        }
        if self.components.is_empty() || self.components.iter().any(|&c| c > 1) {
            return Err(LabError::InvalidParameter("components must be a nonempty subset of {0, 1}".into()));
        }
        Ok(i0)
    }
}

/// Probability that a Brownian bridge from `x` to `y` over variance `v`
/// stays inside `(0, w)`.
pub fn bridge_stay_probability(x: f64, y: f64, w: f64, v: f64) -> f64 {
    if !(x > 0.0 && x < w && y > 0.0 && y < w) {
        return 0.0;
    }
    if v <= 0.0 {
        return 1.0;
    }
    let term = |k: f64| (-2.0 * k * w * (k * w + y - x) / v).exp() - (-2.0 * (k * w + x) * (k * w + y) / v).exp();
    let mut p = term(0.0);
    for k in 1..200 {
        let k = k as f64;
        let add = term(k) + term(-k);
        p += add;
        if add.abs() < 1e-17 && k > 2.0 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Local variance of component `nu` over step `m`, for bridge monitoring.
fn local_variance(model: &LagModelSpec, grid: &TimeGrid, m: usize, nu: usize) -> f64 {
    let sigma = model.sigma(nu).at(grid.time(m));
    let extra = match model.drift {
        DriftSpec::IndependentGaussian { scale, .. } => scale[nu] * scale[nu],
        _ => 0.0,
    };
    (sigma * sigma + extra) * grid.step
}

/// Per-path probability (0/1 under grid monitoring) that the window path
/// `X_t − X_{t0} − target(t)` stays inside the `eps` band.
fn tube_probability(
    x: &[[f64; 2]],
    i0: usize,
    query: &SmallBallQuery,
    variances: &[[f64; 2]],
) -> f64 {
    let base = x[i0];
    let offset = |i: usize, nu: usize| x[i][nu] - base[nu] - query.target[i - i0][nu];
    for i in i0..x.len() {
        for &nu in &query.components {
            if offset(i, nu).abs() >= query.eps {
                return 0.0;
            }
        }
    }
    if query.monitoring == Monitoring::Grid {
        return 1.0;
    }
    let w = 2.0 * query.eps;
    let mut p = 1.0;
    for i in i0..x.len() - 1 {
        for &nu in &query.components {
            p *= bridge_stay_probability(offset(i, nu) + query.eps, offset(i + 1, nu) + query.eps, w, variances[i][nu]);
        }
    }
    p
}

pub fn empirical_small_ball(
    model: &LagModelSpec,
    query: &SmallBallQuery,
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<Proportion, LabError> {
    let i0 = query.validate(&grid)?;
    if n_paths == 0 {
        return Err(LabError::InvalidParameter("n_paths must be >= 1".into()));
    }
    let generator = PathGenerator::new(model, grid, seed)?;
    let variances: Vec<[f64; 2]> = (0..grid.n_steps)
        .map(|m| [local_variance(model, &grid, m, 0), local_variance(model, &grid, m, 1)])
        .collect();
    let samples: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| tube_probability(&generator.generate(p).x, i0, query, &variances))
        .collect();
    Ok(match query.monitoring {
        Monitoring::Grid => Proportion::from_counts(samples.iter().filter(|v| **v > 0.0).count() as u64, n_paths as u64),
        Monitoring::BrownianBridge => Proportion::from_mean(&samples),
    })
}

/// Probability that both components stay within `delta` of their time-`t`
/// values until the horizon.
pub fn empirical_stickiness(
    model: &LagModelSpec,
    t: f64,
    delta: f64,
    monitoring: Monitoring,
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<Proportion, LabError> {
    let query = SmallBallQuery::zero_target(t, delta, &grid)?.with_monitoring(monitoring);
    empirical_small_ball(model, &query, grid, n_paths, seed)
}

/// Events measurable with respect to the history up to `t1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Conditioning {
    #[default]
    None,
    /// `X¹_{t1} > level`.
    LeaderAbove { level: f64 },
    /// `X²_{t1} > level`.
    FollowerAbove { level: f64 },
    /// `sup_{u ≤ t1} |X¹_u| < level`.
    LeaderConfined { level: f64 },
}

impl Conditioning {
    pub fn holds(&self, history: &[[f64; 2]]) -> bool {
        let now = history[history.len() - 1];
        match *self {
            Self::None => true,
            Self::LeaderAbove { level } => now[0] > level,
            Self::FollowerAbove { level } => now[1] > level,
            Self::LeaderConfined { level } => history.iter().all(|v| v[0].abs() < level),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CudCell {
    /// Sign pattern, e.g. `"+-"` for `X¹` up and `X²` down.
    pub signs: String,
    pub count: u64,
    pub frequency: Proportion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CudTable {
    pub t1: f64,
    pub t2: f64,
    pub conditioning: Conditioning,
    pub n_paths: u64,
    /// Paths inside the conditioning event.
    pub n_conditioned: u64,
    pub cells: Vec<CudCell>,
    /// Paths where either increment is below the tie tolerance.
    pub ties: u64,
}

impl CudTable {
    pub fn cell(&self, signs: &str) -> &CudCell {
        self.cells.iter().find(|c| c.signs == signs).expect("known sign pattern")
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "signs,count,n_conditioned,frequency,stderr,ci_low,ci_high")?;
        for c in &self.cells {
            let f = &c.frequency;
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.signs, c.count, self.n_conditioned, f.estimate, f.stderr, f.ci_low, f.ci_high
            )?;
        }
        writeln!(out, "ties,{},{},,,,", self.ties, self.n_conditioned)
    }
}

pub const SIGN_PATTERNS: [&str; 4] = ["++", "+-", "-+", "--"];

/// Joint sign frequencies of `X_{t2} − X_{t1}` within a conditioning event.
pub fn empirical_cud(
    model: &LagModelSpec,
    t1: f64,
    t2: f64,
    conditioning: Conditioning,
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<CudTable, LabError> {
    let i1 = grid.index_of(t1)?;
    let i2 = grid.index_of(t2)?;
    if i2 <= i1 {
        return Err(LabError::InvalidParameter(format!("need t1 < t2, got t1={t1}, t2={t2}")));
    }
    if n_paths == 0 {
        return Err(LabError::InvalidParameter("n_paths must be >= 1".into()));
    }
    let generator = PathGenerator::new(model, grid, seed)?;
    // None: outside the event; Some(None): tie; Some(Some(k)): pattern k.
    let outcomes: Vec<Option<Option<usize>>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let x = generator.generate(p).x;
            if !conditioning.holds(&x[..=i1]) {
                return None;
            }
            let d = [x[i2][0] - x[i1][0], x[i2][1] - x[i1][1]];
            if d[0].abs() < TIE_TOL || d[1].abs() < TIE_TOL {
                return Some(None);
            }
            Some(Some(usize::from(d[0] < 0.0) * 2 + usize::from(d[1] < 0.0)))
        })
        .collect();
    let mut counts = [0u64; 4];
    let mut ties = 0;
    let mut inside = 0;
    for o in outcomes.into_iter().flatten() {
        inside += 1;
        match o {
            Some(k) => counts[k] += 1,
            None => ties += 1,
        }
    }
    if inside == 0 {
        return Err(LabError::DegenerateEvent);
    }
    Ok(CudTable {
        t1,
        t2,
        conditioning,
        n_paths: n_paths as u64,
        n_conditioned: inside,
        cells: SIGN_PATTERNS
            .iter()
            .zip(counts)
            .map(|(s, count)| CudCell {
                signs: s.to_string(),
                count,
                frequency: Proportion::from_counts(count, inside),
            })
            .collect(),
        ties,
    })
}
