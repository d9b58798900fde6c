use serde::{Deserialize, Serialize};

use super::SimError;

/// Relative tolerance for "is a multiple of the step" checks.
pub const GRID_TOL: f64 = 1e-9;

/// Uniform time grid `t_start + i·step`, `i = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_start: f64,
    pub step: f64,
    pub n_steps: usize,
}

/// `x / step` as an integer when `x` is a multiple of `step`.
pub fn steps_in(x: f64, step: f64) -> Option<usize> {
    if !(x >= 0.0 && step > 0.0) {
        return None;
    }
    let ratio = x / step;
    let n = ratio.round();
    ((ratio - n).abs() <= GRID_TOL * ratio.max(1.0)).then_some(n as usize)
}

impl TimeGrid {
    pub fn new(horizon: f64, step: f64) -> Result<Self, SimError> {
        if !(step > 0.0 && step.is_finite() && horizon > 0.0 && horizon.is_finite()) {
            return Err(SimError::InvalidGrid(format!("horizon {horizon} / step {step}")));
        }
        let n_steps = steps_in(horizon, step)
            .ok_or_else(|| SimError::InvalidGrid(format!("horizon {horizon} is not a multiple of step {step}")))?;
        Ok(Self {
            t_start: 0.0,
            step,
            n_steps,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t_start + self.step * i as f64
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.n_steps)
    }

    /// Grid index of `t`, rejecting off-grid times.
    pub fn index_of(&self, t: f64) -> Result<usize, SimError> {
        let rel = t - self.t_start;
        match steps_in(rel, self.step) {
            Some(i) if i <= self.n_steps => Ok(i),
            _ => Err(SimError::OffGrid(t)),
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|i| self.time(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commensurability() {
        assert_eq!(steps_in(0.1, 0.001), Some(100));
        assert_eq!(steps_in(0.1, 0.01), Some(10));
        assert_eq!(steps_in(0.105, 0.01), None);
        assert!(TimeGrid::new(1.0, 0.3).is_err());
        let g = TimeGrid::new(1.1, 0.001).unwrap();
        assert_eq!(g.n_steps, 1100);
        assert_eq!(g.index_of(0.1).unwrap(), 100);
        assert!(g.index_of(0.1005).is_err());
        assert!(g.index_of(1.2).is_err());
    }
}
