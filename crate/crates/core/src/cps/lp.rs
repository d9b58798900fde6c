//! Dense phase-one simplex for LP feasibility.
//!
//! Rows are brought to `A x = b, b ≥ 0, x ≥ 0` with slack columns, then one
//! artificial column per row is added and the total artificial mass is
//! minimized with Bland's rule. A positive optimum comes with a Farkas
//! vector `y`: `yᵀA ≤ 0` on every real column and `yᵀb > 0`.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Eq,
    Ge,
    Le,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Lp {
    pub n_vars: usize,
    pub rows: Vec<Row>,
    /// Magnitude below which a row's terms count as zero when residuals are
    /// made relative.
    pub zero_scale: f64,
}

impl Lp {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            rows: Vec::new(),
            zero_scale: f64::MIN_POSITIVE,
        }
    }

    pub fn with_zero_scale(mut self, zero_scale: f64) -> Self {
        self.zero_scale = zero_scale.max(f64::MIN_POSITIVE);
        self
    }

    pub fn push(&mut self, coeffs: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        self.rows.push(Row { coeffs, cmp, rhs });
    }

    /// Largest violation of any row at `x`, relative to the magnitude of the
    /// row's terms. Rows whose terms are all tiny keep their own scale.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let lhs: f64 = r.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
                let scale = (r.rhs.abs() + r.coeffs.iter().map(|&(j, a)| (a * x[j]).abs()).sum::<f64>())
                    .max(self.zero_scale);
                let v = match r.cmp {
                    Cmp::Eq => (lhs - r.rhs).abs(),
                    Cmp::Ge => (r.rhs - lhs).max(0.0),
                    Cmp::Le => (lhs - r.rhs).max(0.0),
                };
                v / scale
            })
            .chain(x.iter().map(|v| (-v).max(0.0)))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Feasible {
        x: Vec<f64>,
        pivots: usize,
    },
    Infeasible {
        /// Optimal artificial mass of phase one.
        infeasibility: f64,
        /// `yᵀb` of the Farkas vector in standard form.
        farkas_gap: f64,
        /// `max_j (yᵀA)_j` over real columns; nonpositive up to round-off.
        farkas_residual: f64,
        pivots: usize,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("simplex did not terminate within {0} pivots")]
    PivotLimit(usize),
    #[error("numerical breakdown: pivot {pivot:e}, tableau magnitude {magnitude:e}")]
    Numerical { pivot: f64, magnitude: f64 },
}

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
/// Largest relative row violation (see [`Lp::max_residual`]) of the refined
/// basic solution that still counts as feasible. The phase-one optimum alone
/// is an absolute quantity and cannot see rows whose terms are tiny.
pub const FEASIBILITY_TOL: f64 = 1e-9;

pub fn solve_feasibility(lp: &Lp) -> Result<LpOutcome, LpError> {
    let m = lp.rows.len();
    let n_slack = lp.rows.iter().filter(|r| r.cmp != Cmp::Eq).count();
    let n_real = lp.n_vars + n_slack;
    let width = n_real + m + 1;
    let rhs_col = width - 1;
    let mut t = vec![0.0; (m + 1) * width];
    let idx = |r: usize, c: usize| r * width + c;

    let mut slack = lp.n_vars;
    for (i, row) in lp.rows.iter().enumerate() {
        let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
        for &(j, a) in &row.coeffs {
            t[idx(i, j)] += sign * a;
        }
        match row.cmp {
            Cmp::Eq => {}
            Cmp::Ge => {
                t[idx(i, slack)] = -sign;
                slack += 1;
            }
            Cmp::Le => {
                t[idx(i, slack)] = sign;
                slack += 1;
            }
        }
        t[idx(i, n_real + i)] = 1.0;
        t[idx(i, rhs_col)] = sign * row.rhs;
    }
    // objective row: reduced costs of min Σ artificials
    for c in 0..width {
        if c >= n_real && c < n_real + m {
            continue;
        }
        let s: f64 = (0..m).map(|i| t[idx(i, c)]).sum();
        t[idx(m, c)] = -s;
    }
    let mut basis: Vec<usize> = (n_real..n_real + m).collect();

    let max_pivots = 50 * (m + width) + 1000;
    let mut pivots = 0;
    // columns whose reduced cost is negative only through round-off
    let mut stalled = vec![false; n_real + m];
    loop {
        let entering = (0..n_real + m).find(|&c| !stalled[c] && t[idx(m, c)] < -COST_TOL);
        let Some(e) = entering else { break };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = t[idx(i, e)];
            if a > PIVOT_TOL {
                let ratio = t[idx(i, rhs_col)].max(0.0) / a;
                let better = match leave {
                    None => true,
                    Some((l, best)) => ratio < best || (ratio == best && basis[i] < basis[l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // Phase one is bounded below by zero, so a column without a positive
        // entry can only look improving through round-off.
        let Some((l, _)) = leave else {
            stalled[e] = true;
            continue;
        };
        pivot(&mut t, width, l, e);
        basis[l] = e;
        stalled.iter_mut().for_each(|s| *s = false);
        pivots += 1;
        if pivots > max_pivots {
            return Err(LpError::PivotLimit(max_pivots));
        }
    }

    let objective = -t[idx(m, rhs_col)];
    let x_b = refine(lp, &t, width, &basis);
    let mut x = vec![0.0; lp.n_vars];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < lp.n_vars {
            x[bv] = x_b[i].max(0.0);
        }
    }
    if lp.max_residual(&x) <= FEASIBILITY_TOL {
        return Ok(LpOutcome::Feasible { x, pivots });
    }
    // y_i = 1 − (reduced cost of artificial i)
    let y: Vec<f64> = (0..m).map(|i| 1.0 - t[idx(m, n_real + i)]).collect();
    let farkas_gap: f64 = (0..m).map(|i| y[i] * a_std(lp, i).1).sum();
    let mut farkas_residual = f64::NEG_INFINITY;
    let mut col = vec![0.0; n_real];
    for (i, yi) in y.iter().enumerate() {
        let (entries, _) = a_std(lp, i);
        for (j, a) in entries {
            col[j] += yi * a;
        }
    }
    for v in col {
        farkas_residual = farkas_residual.max(v);
    }
    Ok(LpOutcome::Infeasible {
        infeasibility: objective,
        farkas_gap,
        farkas_residual,
        pivots,
    })
}

const REFINE_STEPS: usize = 3;

/// Basic solution with a few rounds of iterative refinement. The basis
/// inverse sits in the artificial columns of the final tableau; residuals
/// are taken against the original rows so small rows keep their own scale.
fn refine(lp: &Lp, t: &[f64], width: usize, basis: &[usize]) -> Vec<f64> {
    let m = lp.rows.len();
    let n_real = width - 1 - m;
    let rows: Vec<(Vec<(usize, f64)>, f64)> = (0..m).map(|i| a_std(lp, i)).collect();
    let mut x_b: Vec<f64> = (0..m).map(|i| t[i * width + width - 1]).collect();
    let mut z = vec![0.0; n_real + m];
    for _ in 0..REFINE_STEPS {
        z.iter_mut().for_each(|v| *v = 0.0);
        for (i, &bv) in basis.iter().enumerate() {
            z[bv] = x_b[i];
        }
        let r: Vec<f64> = rows
            .iter()
            .enumerate()
            .map(|(i, (entries, b))| b - entries.iter().map(|&(j, a)| a * z[j]).sum::<f64>() - z[n_real + i])
            .collect();
        for (i, xi) in x_b.iter_mut().enumerate() {
            let inv = &t[i * width + n_real..i * width + n_real + m];
            *xi += inv.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    x_b
}

/// Row `i` of the standard form (sign-normalized, with its slack column).
fn a_std(lp: &Lp, i: usize) -> (Vec<(usize, f64)>, f64) {
    let row = &lp.rows[i];
    let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
    let mut out: Vec<(usize, f64)> = row.coeffs.iter().map(|&(j, a)| (j, sign * a)).collect();
    let slack = lp.n_vars + lp.rows[..i].iter().filter(|r| r.cmp != Cmp::Eq).count();
    match row.cmp {
        Cmp::Eq => {}
        Cmp::Ge => out.push((slack, -sign)),
        Cmp::Le => out.push((slack, sign)),
    }
    (out, sign * row.rhs)
}

fn pivot(t: &mut [f64], width: usize, l: usize, e: usize) {
    let p = t[l * width + e];
    for c in 0..width {
        t[l * width + c] /= p;
    }
    let (before, rest) = t.split_at_mut(l * width);
    let (prow, after) = rest.split_at_mut(width);
    let eliminate = |row: &mut [f64]| {
        let f = row[e];
        if f != 0.0 {
            for (v, pv) in row.iter_mut().zip(prow.iter()) {
                *v -= f * pv;
            }
        }
    };
    before.chunks_mut(width).for_each(eliminate);
    after.chunks_mut(width).for_each(eliminate);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasible_box() {
        // x + y = 1, x ≥ 0.25, y ≥ 0.5
        let mut lp = Lp::new(2);
        lp.push(vec![(0, 1.0), (1, 1.0)], Cmp::Eq, 1.0);
        lp.push(vec![(0, 1.0)], Cmp::Ge, 0.25);
        lp.push(vec![(1, 1.0)], Cmp::Ge, 0.5);
        match solve_feasibility(&lp).unwrap() {
            LpOutcome::Feasible { x, .. } => assert!(lp.max_residual(&x) < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_with_certificate() {
        // x + y ≤ 1, x ≥ 0.75, y ≥ 0.5
        let mut lp = Lp::new(2);
        lp.push(vec![(0, 1.0), (1, 1.0)], Cmp::Le, 1.0);
        lp.push(vec![(0, 1.0)], Cmp::Ge, 0.75);
        lp.push(vec![(1, 1.0)], Cmp::Ge, 0.5);
        match solve_feasibility(&lp).unwrap() {
            LpOutcome::Infeasible {
                infeasibility,
                farkas_gap,
                farkas_residual,
                ..
            } => {
                assert!((infeasibility - 0.25).abs() < 1e-12);
                assert!(farkas_gap > 0.0);
                assert!(farkas_residual <= 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_rhs_rows() {
        // −x ≤ −2 and x ≤ 3
        let mut lp = Lp::new(1);
        lp.push(vec![(0, -1.0)], Cmp::Le, -2.0);
        lp.push(vec![(0, 1.0)], Cmp::Le, 3.0);
        match solve_feasibility(&lp).unwrap() {
            LpOutcome::Feasible { x, .. } => assert!(x[0] >= 2.0 - 1e-12 && x[0] <= 3.0 + 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
