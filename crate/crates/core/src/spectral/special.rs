//! Sine/cosine integrals and the oscillatory tail integral
//! `∫_x^∞ e^{iaλ} / λ² dλ` used for exact band integration.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;
const MAX_ITER: usize = 200;

/// Returns `(Ci(x), π/2 − Si(x))` for `x > 0`.
///
/// The complement is returned instead of `Si` so large arguments keep full
/// absolute precision.
pub fn ci_si_complement(x: f64) -> (f64, f64) {
    debug_assert!(x > 0.0);
    if x > 2.0 {
        // Lentz continued fraction for E1(ix).
        let mut b = Complex64::new(1.0, x);
        let mut c = Complex64::new(1.0 / f64::MIN_POSITIVE, 0.0);
        let mut d = b.inv();
        let mut h = d;
        for i in 2..MAX_ITER {
            let a = -(((i - 1) * (i - 1)) as f64);
            b += 2.0;
            d = (d * a + b).inv();
            c = b + c.inv() * a;
            let del = c * d;
            h *= del;
            if (del.re - 1.0).abs() + del.im.abs() < EPS {
                break;
            }
        }
        let h = Complex64::new(x.cos(), -x.sin()) * h;
        (-h.re, -h.im)
    } else {
        let (ci, si) = ci_si_series(x);
        (ci, FRAC_PI_2 - si)
    }
}

fn ci_si_series(x: f64) -> (f64, f64) {
    if x < 1e-150 {
        return (x.ln() + EULER_GAMMA, x);
    }
    let mut sum_s = 0.0;
    let mut sum_c = 0.0;
    let mut fact = 1.0;
    for k in 1..MAX_ITER {
        fact *= x / k as f64;
        let term = fact / k as f64;
        // x^k / (k·k!) feeds Si for odd k and Ci for even k.
        let n = if k % 2 == 1 { (k - 1) / 2 } else { k / 2 };
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            sum_s += sign * term;
        } else {
            sum_c += sign * term;
        }
        if term < EPS * sum_s.abs().max(sum_c.abs()) && k > 2 {
            break;
        }
    }
    (sum_c + x.ln() + EULER_GAMMA, sum_s)
}

/// `∫_x^∞ e^{iaλ} / λ² dλ` for `x > 0` and any real `a`.
pub fn exp_over_square_tail(a: f64, x: f64) -> Complex64 {
    debug_assert!(x > 0.0);
    if a == 0.0 {
        return Complex64::new(1.0 / x, 0.0);
    }
    let m = a.abs();
    let y = m * x;
    let (ci, comp) = ci_si_complement(y);
    // ∫_y^∞ e^{iu}/u² du = e^{iy}/y − (π/2 − Si(y)) − i·Ci(y)
    let inner = Complex64::new(y.cos() / y - comp, y.sin() / y - ci);
    let v = inner * m;
    if a > 0.0 {
        v
    } else {
        v.conj()
    }
}

/// `∫_lo^hi e^{iaλ} / λ² dλ` for `0 < lo ≤ hi ≤ ∞`.
pub fn exp_over_square(a: f64, lo: f64, hi: f64) -> Complex64 {
    if hi.is_infinite() {
        exp_over_square_tail(a, lo)
    } else {
        exp_over_square_tail(a, lo) - exp_over_square_tail(a, hi)
    }
}
