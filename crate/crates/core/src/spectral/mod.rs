//! Correlation kernels, cross-spectral densities and the covariance and
//! integrability computations built on them.

pub mod covariance;
pub mod density;
pub mod gsvz;
pub mod kernel;
pub mod quadrature;
pub mod special;

use thiserror::Error;

pub use covariance::{cross_cov_quadrature, cross_cov_with_error, increment_cross_cov};
pub use density::{validate_csd, BaseBand, CrossSpectralDensity, CsdValidation};
pub use gsvz::{gsvz_check, GsvzReport, GsvzValue};
pub use kernel::{eval_rho_integral, CorrelationKernel, Interpolation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid interval: need 0 <= s < t, got s={s}, t={t}")]
    InvalidInterval { s: f64, t: f64 },
    #[error("kernel sample {0} outside [-1, 1]")]
    KernelOutOfRange(f64),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("frequency {lambda} outside tabulated range [{lo}, {hi}]")]
    OutOfDomain { lambda: f64, lo: f64, hi: f64 },
    #[error("lambda0 must be positive and finite, got {0}")]
    InvalidLambda0(f64),
    #[error("non-finite times t={t}, s={s}")]
    InvalidTimes { t: f64, s: f64 },
    #[error("imaginary residue {0:e} exceeds tolerance; density is not Hermitian")]
    SymmetryViolation(f64),
}

/// `f(λ)` for a validated density.
pub fn eval_csd(f: &CrossSpectralDensity, lambda: f64) -> Result<num_complex::Complex64, SpectralError> {
    f.eval(lambda)
}
