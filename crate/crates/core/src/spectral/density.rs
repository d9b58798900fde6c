use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SpectralError;

/// Largest supported multiscale truncation level; `2^j π` stays exactly
/// representable and finite far beyond this.
pub const MAX_LEVEL: u32 = 900;

/// Tolerance used for both the sup-norm bound and Hermitian symmetry.
pub const VALIDATION_TOL: f64 = 1e-12;

/// Optional coefficient on the base band `[−π/2, π/2]` of a multiscale density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseBand {
    #[serde(rename = "R")]
    pub r: f64,
    pub theta: f64,
}

/// Cross-spectral density `f(λ)` of a bivariate process with Brownian marginals.
///
/// * `Multiscale`: `f(λ) = R_j e^{−iθ_j λ}` on `Λ_j = {2^{j−1}π < |λ| ≤ 2^j π}`
///   for `j = 0..=J_max`. Coefficient arrays shorter than `J_max + 1` repeat
///   their last entry. Frequencies `|λ| ≤ π/2` use `base` if given, else 0.
/// * `PureLag`: `f(λ) = R0 e^{−iθ0 λ}` on the whole line.
/// * `Tabulated`: complex samples on an increasing grid, linearly interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CrossSpectralDensity {
    Multiscale {
        #[serde(rename = "R")]
        r: Vec<f64>,
        theta: Vec<f64>,
        #[serde(rename = "J_max")]
        j_max: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<BaseBand>,
    },
    PureLag {
        #[serde(rename = "R0")]
        r0: f64,
        theta0: f64,
    },
    Tabulated {
        lambda: Vec<f64>,
        re: Vec<f64>,
        im: Vec<f64>,
    },
}

/// A frequency range `lo < λ ≤ hi` (positive side) on which
/// `f(λ) = r e^{−iθλ}` holds for both `λ` and `−λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpPiece {
    pub lo: f64,
    pub hi: f64,
    pub r: f64,
    pub theta: f64,
}

impl CrossSpectralDensity {
    pub fn zero() -> Self {
        Self::PureLag { r0: 0.0, theta0: 0.0 }
    }

    pub fn pure_lag(r0: f64, theta0: f64) -> Self {
        Self::PureLag { r0, theta0 }
    }

    pub fn multiscale(r: Vec<f64>, theta: Vec<f64>, j_max: u32) -> Self {
        Self::Multiscale {
            r,
            theta,
            j_max,
            base: None,
        }
    }

    /// Checks structural well-formedness (not the `|f| ≤ 1` or symmetry
    /// conditions, which `validate_csd` reports on).
    pub fn check_shape(&self) -> Result<(), SpectralError> {
        match self {
            Self::Multiscale { r, theta, j_max, base } => {
                if r.is_empty() || theta.is_empty() {
                    return Err(SpectralError::InvalidDensity("R and theta must be non-empty".into()));
                }
                if *j_max > MAX_LEVEL {
                    return Err(SpectralError::InvalidDensity(format!("J_max {j_max} exceeds {MAX_LEVEL}")));
                }
                let mut all = r.iter().chain(theta.iter());
                if all.any(|v| !v.is_finite())
                    || base.is_some_and(|b| !(b.r.is_finite() && b.theta.is_finite()))
                {
                    return Err(SpectralError::InvalidDensity("non-finite coefficient".into()));
                }
            }
            Self::PureLag { r0, theta0 } => {
                if !(r0.is_finite() && theta0.is_finite()) {
                    return Err(SpectralError::InvalidDensity("non-finite coefficient".into()));
                }
            }
            Self::Tabulated { lambda, re, im } => {
                if lambda.len() < 2 || lambda.len() != re.len() || lambda.len() != im.len() {
                    return Err(SpectralError::InvalidDensity(
                        "tabulated density needs ≥ 2 samples in parallel arrays".into(),
                    ));
                }
                if lambda.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(SpectralError::InvalidDensity("lambda grid must be increasing".into()));
                }
                if lambda.iter().chain(re).chain(im).any(|v| !v.is_finite()) {
                    return Err(SpectralError::InvalidDensity("non-finite sample".into()));
                }
            }
        }
        Ok(())
    }

    fn coeff(values: &[f64], j: u32) -> f64 {
        values[(j as usize).min(values.len() - 1)]
    }

    /// `(R_j, θ_j)` of a multiscale density.
    pub fn band_coefficients(&self, j: u32) -> Option<(f64, f64)> {
        match self {
            Self::Multiscale { r, theta, j_max, .. } if j <= *j_max => {
                Some((Self::coeff(r, j), Self::coeff(theta, j)))
            }
            _ => None,
        }
    }

    /// Frequency beyond which `f` vanishes, if any.
    pub fn support_end(&self) -> Option<f64> {
        match self {
            Self::Multiscale { j_max, .. } => Some(band_edge(*j_max as i32)),
            Self::PureLag { .. } => None,
            Self::Tabulated { lambda, .. } => {
                Some(lambda[0].abs().max(lambda[lambda.len() - 1].abs()))
            }
        }
    }

    pub fn eval(&self, lambda: f64) -> Result<Complex64, SpectralError> {
        match self {
            Self::Multiscale { r, theta, j_max, base } => {
                let m = lambda.abs();
                if m <= FRAC_PI_2 {
                    return Ok(base.map_or(Complex64::new(0.0, 0.0), |b| phase(b.r, b.theta, lambda)));
                }
                match band_index(m) {
                    Some(j) if j <= *j_max => Ok(phase(Self::coeff(r, j), Self::coeff(theta, j), lambda)),
                    _ => Ok(Complex64::new(0.0, 0.0)),
                }
            }
            Self::PureLag { r0, theta0 } => Ok(phase(*r0, *theta0, lambda)),
            Self::Tabulated { lambda: grid, re, im } => {
                let (first, last) = (grid[0], grid[grid.len() - 1]);
                if !(lambda >= first && lambda <= last) {
                    return Err(SpectralError::OutOfDomain { lambda, lo: first, hi: last });
                }
                let i = grid.partition_point(|&g| g <= lambda).clamp(1, grid.len() - 1);
                let (l0, l1) = (grid[i - 1], grid[i]);
                let w = (lambda - l0) / (l1 - l0);
                let a = Complex64::new(re[i - 1], im[i - 1]);
                let b = Complex64::new(re[i], im[i]);
                Ok(a + (b - a) * w)
            }
        }
    }

    /// Piecewise exponential form of `f` restricted to `lo ≤ |λ| ≤ hi`, for
    /// multiscale and pure-lag densities. Pieces where `R = 0` are dropped.
    pub fn exp_pieces(&self, lo: f64, hi: f64) -> Option<Vec<ExpPiece>> {
        let mut out = Vec::new();
        match self {
            Self::PureLag { r0, theta0 } => {
                if *r0 != 0.0 && hi > lo {
                    out.push(ExpPiece { lo, hi, r: *r0, theta: *theta0 });
                }
            }
            Self::Multiscale { base, j_max, .. } => {
                if let Some(b) = base {
                    let (a, z) = (lo, hi.min(FRAC_PI_2));
                    if z > a && b.r != 0.0 {
                        out.push(ExpPiece { lo: a, hi: z, r: b.r, theta: b.theta });
                    }
                }
                for j in 0..=*j_max {
                    let (a, z) = (band_edge(j as i32 - 1).max(lo), band_edge(j as i32).min(hi));
                    if z <= a {
                        if band_edge(j as i32 - 1) >= hi {
                            break;
                        }
                        continue;
                    }
                    let (r, theta) = self.band_coefficients(j).unwrap_or((0.0, 0.0));
                    if r != 0.0 {
                        out.push(ExpPiece { lo: a, hi: z, r, theta });
                    }
                }
            }
            Self::Tabulated { .. } => return None,
        }
        Some(out)
    }

    /// Points in `(lo, hi)` (positive frequencies) where `f` may be non-smooth.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut pts = vec![lo];
        match self {
            Self::Multiscale { j_max, .. } => {
                for j in -1..=(*j_max as i32) {
                    let e = band_edge(j);
                    if e >= hi {
                        break;
                    }
                    if e > lo {
                        pts.push(e);
                    }
                }
            }
            Self::PureLag { .. } => {}
            Self::Tabulated { lambda, .. } => {
                pts.extend(lambda.iter().map(|l| l.abs()).filter(|&l| l > lo && l < hi));
                pts.sort_by(f64::total_cmp);
                pts.dedup();
            }
        }
        pts.push(hi);
        pts
    }
}

fn phase(r: f64, theta: f64, lambda: f64) -> Complex64 {
    Complex64::from_polar(1.0, -theta * lambda) * r
}

/// `2^j π`; `band_edge(-1) = π/2`.
pub fn band_edge(j: i32) -> f64 {
    PI * 2f64.powi(j)
}

/// Multiscale band holding `|λ| > π/2`: smallest `j ≥ 0` with `|λ| ≤ 2^j π`.
pub fn band_index(abs_lambda: f64) -> Option<u32> {
    if !(abs_lambda > FRAC_PI_2) || !abs_lambda.is_finite() {
        return None;
    }
    let mut j = (abs_lambda / PI).log2().ceil().max(0.0) as i32;
    // Correct for rounding in log2 right at the edges.
    while j > 0 && abs_lambda <= band_edge(j - 1) {
        j -= 1;
    }
    while abs_lambda > band_edge(j) {
        j += 1;
    }
    Some(j as u32)
}

/// Outcome of checking `‖f‖_∞ ≤ 1` and `conj f(λ) = f(−λ)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsdValidation {
    pub points_checked: usize,
    pub max_abs: f64,
    pub max_hermite_violation: f64,
    pub out_of_domain: usize,
    pub l_infty_ok: bool,
    pub hermite_ok: bool,
    pub passed: bool,
}

/// Reports the sup-norm and Hermitian-symmetry conditions on `grid`
/// (tabulated densities are additionally checked at their own nodes).
pub fn validate_csd(f: &CrossSpectralDensity, grid: &[f64]) -> CsdValidation {
    let mut points: Vec<f64> = grid.to_vec();
    if let CrossSpectralDensity::Tabulated { lambda, .. } = f {
        points.extend_from_slice(lambda);
    }
    let shape_ok = f.check_shape().is_ok();
    let mut max_abs: f64 = 0.0;
    let mut max_herm: f64 = 0.0;
    let mut out_of_domain = 0;
    if shape_ok {
        for &l in &points {
            match (f.eval(l), f.eval(-l)) {
                (Ok(a), Ok(b)) => {
                    max_abs = max_abs.max(a.norm()).max(b.norm());
                    max_herm = max_herm.max((a.conj() - b).norm());
                }
                _ => out_of_domain += 1,
            }
        }
    }
    let l_infty_ok = shape_ok && max_abs <= 1.0 + VALIDATION_TOL;
    let hermite_ok = shape_ok && max_herm <= VALIDATION_TOL && out_of_domain == 0;
    CsdValidation {
        points_checked: points.len(),
        max_abs,
        max_hermite_violation: max_herm,
        out_of_domain,
        l_infty_ok,
        hermite_ok,
        passed: l_infty_ok && hermite_ok,
    }
}

/// Symmetric grid of `n` points per side spanning `(0, hi]`, including 0.
pub fn symmetric_grid(hi: f64, n: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (1..=n).map(|k| hi * k as f64 / n as f64).collect();
    let neg: Vec<f64> = g.iter().rev().map(|x| -x).collect();
    let mut out = neg;
    out.push(0.0);
    out.append(&mut g);
    out
}
