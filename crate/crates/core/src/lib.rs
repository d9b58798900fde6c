//! Numerical laboratory for continuous-time lead-lag market models.
//!
//! * [`spectral`]: correlation kernels, cross-spectral densities, covariance
//!   quadrature and the high-frequency integrability check.
//! * [`sim`]: bivariate path simulation (explicit lagged realization and
//!   circulant-embedding spectral synthesis).
//! * [`strategy`]: simple strategies, waiting-time filters and value
//!   processes with and without proportional costs.
//! * [`lab`]: Monte Carlo arbitrage experiments and small-ball, stickiness
//!   and sign-pattern diagnostics.
//! * [`cps`]: consistent price systems on scenario trees via linear programming.

pub mod spectral;
pub mod sim;
pub mod strategy;
pub mod lab;
pub mod cps;
