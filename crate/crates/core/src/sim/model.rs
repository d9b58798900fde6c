use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SimError;
use crate::spectral::density::symmetric_grid;
use crate::spectral::{validate_csd, CorrelationKernel, CrossSpectralDensity};

/// Volatility `σ_ν(t)`: a positive constant or a piecewise-constant schedule
/// (`values[i]` on `[knots[i], knots[i+1])`, last value held).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Volatility {
    Constant(f64),
    Piecewise(PiecewiseVolatility),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseVolatility {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl Volatility {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Piecewise(p) => {
                let i = p.knots.partition_point(|&k| k <= t).saturating_sub(1);
                p.values[i]
            }
        }
    }

    fn validate(&self, name: &str) -> Result<(), SimError> {
        let ok = match self {
            Self::Constant(v) => v.is_finite() && *v > 0.0,
            Self::Piecewise(p) => {
                !p.knots.is_empty()
                    && p.knots.len() == p.values.len()
                    && p.knots[0] == 0.0
                    && p.knots.windows(2).all(|w| w[1] > w[0])
                    && p.values.iter().all(|v| v.is_finite() && *v >= 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidModel(format!("{name}: malformed volatility")))
        }
    }
}

/// Drift component `A = (A¹, A²)`, always independent of the Brownian pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    Zero,
    /// `A^ν_t = mu[ν]·t`.
    Linear { mu: [f64; 2] },
    /// `A^ν_t = scale[ν]·Z^ν_t` with `Z` a Brownian pair of correlation `rho`,
    /// drawn from its own RNG substream.
    IndependentGaussian { scale: [f64; 2], rho: f64 },
}

impl DriftSpec {
    pub fn is_random(&self) -> bool {
        matches!(self, Self::IndependentGaussian { .. })
    }

    fn validate(&self) -> Result<(), SimError> {
        let ok = match self {
            Self::Zero => true,
            Self::Linear { mu } => mu.iter().all(|m| m.is_finite()),
            Self::IndependentGaussian { scale, rho } => {
                scale.iter().all(|s| s.is_finite() && *s >= 0.0) && rho.abs() <= 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidModel("malformed drift".into()))
        }
    }
}

/// How the Brownian pair `B = (B¹, B²)` is constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum LagStructure {
    /// `B²` follows `B¹` with delay `theta` and instantaneous correlation `rho`.
    Hry { theta: f64, rho: CorrelationKernel },
    /// Stationary-increment pair with the given cross-spectral density.
    Spectral { density: CrossSpectralDensity },
}

/// Bivariate log-price model `X^ν = A^ν + ∫ σ_ν dB^ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagModelSpec {
    pub lag: LagStructure,
    pub sigma1: Volatility,
    pub sigma2: Volatility,
    pub drift: DriftSpec,
}

impl LagModelSpec {
    pub fn hry(theta: f64, rho: CorrelationKernel) -> Self {
        Self {
            lag: LagStructure::Hry { theta, rho },
            sigma1: Volatility::Constant(1.0),
            sigma2: Volatility::Constant(1.0),
            drift: DriftSpec::Zero,
        }
    }

    pub fn spectral(density: CrossSpectralDensity) -> Self {
        Self {
            lag: LagStructure::Spectral { density },
            sigma1: Volatility::Constant(1.0),
            sigma2: Volatility::Constant(1.0),
            drift: DriftSpec::Zero,
        }
    }

    pub fn with_volatility(mut self, sigma1: Volatility, sigma2: Volatility) -> Self {
        self.sigma1 = sigma1;
        self.sigma2 = sigma2;
        self
    }

    pub fn with_drift(mut self, drift: DriftSpec) -> Self {
        self.drift = drift;
        self
    }

    pub fn sigma(&self, component: usize) -> &Volatility {
        if component == 0 {
            &self.sigma1
        } else {
            &self.sigma2
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match &self.lag {
            LagStructure::Hry { theta, rho } => {
                if !(theta.is_finite() && *theta >= 0.0) {
                    return Err(SimError::InvalidModel(format!("theta must be >= 0, got {theta}")));
                }
                rho.validate()?;
            }
            LagStructure::Spectral { density } => {
                density.check_shape()?;
                let hi = density.support_end().unwrap_or(1e3).min(1e4);
                let report = validate_csd(density, &symmetric_grid(hi, 4096));
                if !report.passed {
                    return Err(SimError::InvalidModel(format!(
                        "density fails validation: max|f|={}, hermite violation={}",
                        report.max_abs, report.max_hermite_violation
                    )));
                }
            }
        }
        self.sigma1.validate("sigma1")?;
        self.sigma2.validate("sigma2")?;
        self.drift.validate()
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn model_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("model serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
