//! Cross-covariances implied by a cross-spectral density:
//!
//! ```text
//! E[B¹_t B²_s] = (1/2π) ∫ (e^{−iλt} − 1)(e^{iλs} − 1) / λ² · f(λ) dλ
//! ```
//!
//! [`cross_cov_quadrature`] integrates numerically on `|λ| ≤ Λq` and closes
//! the remainder with exact band integrals of `e^{iaλ}/λ²` where `f` has
//! piecewise-exponential form. [`increment_cross_cov`] evaluates the lag-`k`
//! cross-covariance of grid increments through exact band integrals.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::density::CrossSpectralDensity;
use super::quadrature::{integrate_pieces, QuadOptions};
use super::special::exp_over_square;
use super::SpectralError;

/// Imaginary residue above which Hermitian symmetry is considered broken.
pub const IMAG_RESIDUE_TOL: f64 = 1e-8;

/// Numerical integration stops here; beyond it exact band integrals take over.
const NUMERIC_CUTOFF: f64 = 64.0 * PI;

/// `2 sin(λx/2) / λ`, continuous through 0.
fn half_chord(lambda: f64, x: f64) -> f64 {
    if lambda == 0.0 {
        x
    } else {
        2.0 * (0.5 * lambda * x).sin() / lambda
    }
}

/// `(e^{−iλt} − 1)(e^{iλs} − 1) / λ²` without cancellation near 0.
fn cov_kernel(lambda: f64, t: f64, s: f64) -> Complex64 {
    // (e^{−iλt} − 1)/λ = −i e^{−iλt/2} · 2 sin(λt/2)/λ
    // (e^{iλs} − 1)/λ  =  i e^{iλs/2}  · 2 sin(λs/2)/λ
    let mag = half_chord(lambda, t) * half_chord(lambda, s);
    Complex64::from_polar(mag, 0.5 * lambda * (s - t))
}

/// Sum of `c · ∫ e^{iaλ}/λ²` over a positive-frequency piece and its mirror.
fn exp_terms_on_piece(terms: &[(f64, f64)], r: f64, theta: f64, lo: f64, hi: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &(c, a) in terms {
        // positive side: f = r e^{−iθλ}; negative side mirrors a → −a.
        let shift = a - theta;
        acc += (exp_over_square(shift, lo, hi) + exp_over_square(-shift, lo, hi)) * c;
    }
    acc * r
}

fn numeric_integral(
    f: &CrossSpectralDensity,
    lo: f64,
    hi: f64,
    max_freq: f64,
    kernel: &dyn Fn(f64) -> Complex64,
) -> Result<(Complex64, f64), SpectralError> {
    if hi <= lo {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-12,
        max_subdivisions: 60,
    };
    let width = (PI / max_freq.max(1e-3)).min(hi - lo).max(1e-6);
    let breaks = f.breakpoints(lo, hi);
    let pos = |l: f64| kernel(l) * f.eval(l).unwrap_or_default();
    let neg = |l: f64| kernel(-l) * f.eval(-l).unwrap_or_default();
    let p = integrate_pieces(&pos, &breaks, width, &opts);
    let n = integrate_pieces(&neg, &breaks, width, &opts);
    Ok((p.value + n.value, p.error + n.error))
}

/// `E[B¹_t B²_s]` by numerical quadrature of the spectral representation.
pub fn cross_cov_quadrature(f: &CrossSpectralDensity, t: f64, s: f64) -> Result<f64, SpectralError> {
    Ok(cross_cov_with_error(f, t, s)?.0)
}

/// Same as [`cross_cov_quadrature`], also returning the quadrature error estimate.
pub fn cross_cov_with_error(f: &CrossSpectralDensity, t: f64, s: f64) -> Result<(f64, f64), SpectralError> {
    f.check_shape()?;
    if !(t.is_finite() && s.is_finite()) {
        return Err(SpectralError::InvalidTimes { t, s });
    }
    let support = f.support_end().unwrap_or(f64::INFINITY);
    let cutoff = match f {
        CrossSpectralDensity::Tabulated { .. } => support,
        _ => NUMERIC_CUTOFF.min(support),
    };
    let max_freq = t.abs() + s.abs() + max_lag(f);
    let kernel = |l: f64| cov_kernel(l, t, s);
    let (mut total, error) = numeric_integral(f, 0.0, cutoff, max_freq, &kernel)?;

    if support > cutoff {
        // (e^{−iλt} − 1)(e^{iλs} − 1) = e^{iλ(s−t)} − e^{−iλt} − e^{iλs} + 1
        let terms = [(1.0, s - t), (-1.0, -t), (-1.0, s), (1.0, 0.0)];
        for p in f.exp_pieces(cutoff, support).unwrap_or_default() {
            total += exp_terms_on_piece(&terms, p.r, p.theta, p.lo, p.hi);
        }
    }
    let total = total / (2.0 * PI);
    if total.im.abs() > IMAG_RESIDUE_TOL {
        return Err(SpectralError::SymmetryViolation(total.im));
    }
    Ok((total.re, error / (2.0 * PI)))
}

fn max_lag(f: &CrossSpectralDensity) -> f64 {
    match f {
        CrossSpectralDensity::PureLag { theta0, .. } => theta0.abs(),
        CrossSpectralDensity::Multiscale { theta, base, .. } => theta
            .iter()
            .map(|t| t.abs())
            .chain(base.map(|b| b.theta.abs()))
            .fold(0.0, f64::max),
        CrossSpectralDensity::Tabulated { .. } => 0.0,
    }
}

/// `(Δ − |x|)_+`: `(1/2π) ∫ 4 sin²(λΔ/2)/λ² e^{iλx} dλ`.
fn triangle(step: f64, x: f64) -> f64 {
    (step - x.abs()).max(0.0)
}

/// Lag-`k` cross-covariance of grid increments,
/// `E[ΔB¹_m ΔB²_{m+k}] = (1/2π) ∫ |e^{iλΔ} − 1|²/λ² e^{iλkΔ} f(λ) dλ`.
pub fn increment_cross_cov(f: &CrossSpectralDensity, step: f64, k: i64) -> Result<f64, SpectralError> {
    let offset = k as f64 * step;
    // |e^{iλΔ} − 1|² e^{iλx} = 2e^{iλx} − e^{iλ(x+Δ)} − e^{iλ(x−Δ)}
    let terms = [(2.0, offset), (-1.0, offset + step), (-1.0, offset - step)];
    let value = match f {
        CrossSpectralDensity::PureLag { r0, theta0 } => Complex64::new(r0 * triangle(step, offset - theta0), 0.0),
        CrossSpectralDensity::Multiscale { base, j_max, .. } => {
            let mut acc = Complex64::new(0.0, 0.0);
            if let Some(b) = base {
                // whole-line closed form minus everything outside the base band
                acc += b.r * triangle(step, offset - b.theta);
                acc -= exp_terms_on_piece(&terms, b.r, b.theta, PI / 2.0, f64::INFINITY) / (2.0 * PI);
            }
            let top = super::density::band_edge(*j_max as i32);
            if let Some(pieces) = f.exp_pieces(PI / 2.0, top) {
                for p in pieces.into_iter().filter(|p| p.lo >= PI / 2.0) {
                    acc += exp_terms_on_piece(&terms, p.r, p.theta, p.lo, p.hi) / (2.0 * PI);
                }
            }
            acc
        }
        CrossSpectralDensity::Tabulated { .. } => {
            let support = f.support_end().unwrap_or(0.0);
            let kernel = |l: f64| {
                let c = half_chord(l, step);
                Complex64::from_polar(c * c, l * offset)
            };
            let max_freq = offset.abs() + step;
            numeric_integral(f, 0.0, support, max_freq, &kernel)?.0 / (2.0 * PI)
        }
    };
    if value.im.abs() > IMAG_RESIDUE_TOL {
        return Err(SpectralError::SymmetryViolation(value.im));
    }
    Ok(value.re)
}
