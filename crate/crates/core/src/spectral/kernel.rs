use serde::{Deserialize, Serialize};

use super::SpectralError;

/// How samples between knots are joined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// `rho(u) = values[i]` on `[knots[i], knots[i+1])`.
    PiecewiseConstant,
    /// Linear between knots.
    PiecewiseLinear,
}

/// Deterministic correlation kernel `rho: [0, ∞) → [−1, 1]`.
///
/// Beyond the last knot the last sample is held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationKernel {
    pub interpolation: Interpolation,
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl CorrelationKernel {
    pub fn constant(rho: f64) -> Self {
        Self {
            interpolation: Interpolation::PiecewiseConstant,
            knots: vec![0.0],
            values: vec![rho],
        }
    }

    pub fn piecewise_constant(knots: Vec<f64>, values: Vec<f64>) -> Self {
        Self {
            interpolation: Interpolation::PiecewiseConstant,
            knots,
            values,
        }
    }

    pub fn piecewise_linear(knots: Vec<f64>, values: Vec<f64>) -> Self {
        Self {
            interpolation: Interpolation::PiecewiseLinear,
            knots,
            values,
        }
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        if self.knots.is_empty() || self.knots.len() != self.values.len() {
            return Err(SpectralError::InvalidKernel(format!(
                "{} knots but {} values",
                self.knots.len(),
                self.values.len()
            )));
        }
        if self.knots[0] != 0.0 {
            return Err(SpectralError::InvalidKernel("first knot must be 0".into()));
        }
        if self.knots.windows(2).any(|w| !(w[1] > w[0])) || self.knots.iter().any(|k| !k.is_finite()) {
            return Err(SpectralError::InvalidKernel(
                "knots must be finite and strictly increasing".into(),
            ));
        }
        if let Some(v) = self.values.iter().find(|v| !(v.abs() <= 1.0)) {
            return Err(SpectralError::KernelOutOfRange(*v));
        }
        Ok(())
    }

    /// Index of the segment containing `u`: last knot `<= u`.
    fn segment(&self, u: f64) -> usize {
        self.knots.partition_point(|&k| k <= u).saturating_sub(1)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let i = self.segment(u);
        match self.interpolation {
            Interpolation::PiecewiseConstant => self.values[i],
            Interpolation::PiecewiseLinear => {
                if i + 1 >= self.knots.len() {
                    return self.values[i];
                }
                let (k0, k1) = (self.knots[i], self.knots[i + 1]);
                let w = (u - k0) / (k1 - k0);
                self.values[i] + w * (self.values[i + 1] - self.values[i])
            }
        }
    }

    /// Exact antiderivative `∫_0^u rho`.
    fn primitive(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.knots.len() {
            let start = self.knots[i];
            if u <= start {
                break;
            }
            let end = self.knots.get(i + 1).copied().unwrap_or(f64::INFINITY).min(u);
            let len = end - start;
            acc += match self.interpolation {
                Interpolation::PiecewiseConstant => self.values[i] * len,
                Interpolation::PiecewiseLinear => {
                    let v_end = self.eval(end);
                    0.5 * (self.values[i] + v_end) * len
                }
            };
        }
        acc
    }

    /// `∫_s^t rho(u) du`, exact for both interpolation modes.
    pub fn integral(&self, s: f64, t: f64) -> Result<f64, SpectralError> {
        if !(s >= 0.0 && s < t) {
            return Err(SpectralError::InvalidInterval { s, t });
        }
        self.validate()?;
        Ok(self.primitive(t) - self.primitive(s))
    }

    /// Cell average `(1/(t−s)) ∫_s^t rho`; always within `[−1, 1]`.
    pub fn average(&self, s: f64, t: f64) -> Result<f64, SpectralError> {
        Ok((self.integral(s, t)? / (t - s)).clamp(-1.0, 1.0))
    }
}

/// `∫_s^t rho(u) du` for a kernel, rejecting `s >= t` and out-of-range samples.
pub fn eval_rho_integral(rho: &CorrelationKernel, s: f64, t: f64) -> Result<f64, SpectralError> {
    rho.integral(s, t)
}
