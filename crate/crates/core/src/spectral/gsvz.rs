//! The integrability check `∫_{λ0}^∞ log(1 − |f(λ)|) / λ² dλ > −∞`.
//!
//! The integral is accumulated over dyadic segments `(2^{k−1}π, 2^kπ]`,
//! which coincide with the multiscale bands. After the last segment the
//! remaining tail is closed analytically whenever `|f|` is constant there.
//!
//! Divergence heuristic: the report is flagged when any segment contributes
//! `−∞` (|f| = 1 on a set of positive measure), or when three consecutive
//! doublings each lower the partial integral by more than 1.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::density::CrossSpectralDensity;
use super::quadrature::{integrate, QuadOptions};
use super::SpectralError;

/// Drop per doubling above which a segment counts toward divergence.
pub const DIVERGENCE_DROP: f64 = 1.0;
/// Number of consecutive large drops that flags divergence.
pub const DIVERGENCE_RUN: usize = 3;
/// Doublings explored for densities without bounded support.
const MAX_DOUBLINGS: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum GsvzValue {
    Finite(f64),
    Diverged,
}

impl GsvzValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsvzReport {
    pub lambda0: f64,
    pub value: GsvzValue,
    pub quadrature_error_estimate: f64,
    /// `(Λ, ∫_{λ0}^Λ)` after each doubling; `-inf` once a segment diverged.
    pub partials: Vec<(f64, f64)>,
    /// Closed-form contribution beyond the last partial.
    pub tail: f64,
}

fn log_integrand(f: &CrossSpectralDensity, lambda: f64) -> f64 {
    let m = f.eval(lambda).map(|v| v.norm()).unwrap_or(0.0);
    if m >= 1.0 {
        f64::NEG_INFINITY
    } else {
        (-m).ln_1p() / (lambda * lambda)
    }
}

fn segment_integral(f: &CrossSpectralDensity, lo: f64, hi: f64, opts: &QuadOptions) -> (f64, f64) {
    let g = |l: f64| log_integrand(f, l);
    let mut value = 0.0;
    let mut error = 0.0;
    for w in f.breakpoints(lo, hi).windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let r = integrate(&g, w[0], w[1], opts);
        if r.value == f64::NEG_INFINITY || r.value.is_nan() {
            return (f64::NEG_INFINITY, 0.0);
        }
        value += r.value;
        error += r.error;
    }
    (value, error)
}

/// Closed-form tail `∫_Λ^∞ log(1 − |f|)/λ²` when `|f|` is constant beyond `Λ`.
fn tail_beyond(f: &CrossSpectralDensity, from: f64) -> f64 {
    let constant_abs = match f {
        CrossSpectralDensity::PureLag { r0, .. } => r0.abs(),
        CrossSpectralDensity::Multiscale { .. } => 0.0,
        CrossSpectralDensity::Tabulated { lambda, re, im } => {
            // held at the value of the outermost sample
            let i = if lambda[0].abs() > lambda[lambda.len() - 1].abs() { 0 } else { lambda.len() - 1 };
            re[i].hypot(im[i])
        }
    };
    if constant_abs >= 1.0 {
        f64::NEG_INFINITY
    } else {
        (-constant_abs).ln_1p() / from
    }
}

pub fn gsvz_check(f: &CrossSpectralDensity, lambda0: f64) -> Result<GsvzReport, SpectralError> {
    if !(lambda0 > 0.0 && lambda0.is_finite()) {
        return Err(SpectralError::InvalidLambda0(lambda0));
    }
    f.check_shape()?;
    let opts = QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-13,
        max_subdivisions: 100,
    };
    let end = match f.support_end() {
        Some(e) => e.max(lambda0),
        None => lambda0.max(PI) * 2f64.powi(MAX_DOUBLINGS as i32),
    };

    let mut partials = Vec::new();
    let mut partial = 0.0;
    let mut error = 0.0;
    let mut run = 0usize;
    let mut diverged = false;
    let mut lo = lambda0;
    // first dyadic edge strictly above lambda0
    let mut k = (lambda0 / PI).log2().floor() as i32 + 1;
    while lo < end {
        let mut hi = (PI * 2f64.powi(k)).min(end);
        if hi <= lo {
            k += 1;
            hi = (PI * 2f64.powi(k)).min(end);
        }
        let (c, e) = segment_integral(f, lo, hi, &opts);
        error += e;
        if c == f64::NEG_INFINITY {
            partial = f64::NEG_INFINITY;
            diverged = true;
        } else if !diverged {
            partial += c;
        }
        if -c > DIVERGENCE_DROP {
            run += 1;
            if run >= DIVERGENCE_RUN {
                diverged = true;
            }
        } else {
            run = 0;
        }
        partials.push((hi, partial));
        lo = hi;
        k += 1;
    }
    let tail = tail_beyond(f, end);
    if tail == f64::NEG_INFINITY {
        diverged = true;
    }
    let value = if diverged {
        GsvzValue::Diverged
    } else {
        GsvzValue::Finite((partial + tail).min(0.0))
    };
    Ok(GsvzReport {
        lambda0,
        value,
        quadrature_error_estimate: error,
        partials,
        tail,
    })
}
