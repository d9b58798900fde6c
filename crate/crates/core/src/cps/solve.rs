use std::io::Write;

use serde::{Deserialize, Serialize};

use super::lp::{solve_feasibility, Cmp, Lp, LpOutcome};
use super::tree::ScenarioTree;
use super::CpsError;

/// Lower bound on `q`, as a fraction of the uniform weight of a level.
pub const Q_MIN_FRACTION: f64 = 1e-9;
/// Absolute tolerance on the bisection for the minimal `ε`.
pub const EPS_TOL: f64 = 1e-6;
/// Relative tolerance for accepting the reference measure as is.
const MARTINGALE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CpsStatus {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpsNode {
    pub id: usize,
    /// Shadow price `M`.
    pub m: [f64; 2],
    /// Weight of the node under the new measure.
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpsSolution {
    pub epsilon: f64,
    pub status: CpsStatus,
    /// Empty when infeasible.
    pub nodes: Vec<CpsNode>,
    /// Largest relative violation of the band, martingale and measure
    /// constraints by the returned solution.
    pub max_residual: f64,
    /// Phase-one optimum and Farkas data when infeasible.
    pub infeasibility: Option<f64>,
    pub farkas_gap: Option<f64>,
    pub farkas_residual: Option<f64>,
    pub lp_pivots: usize,
}

impl CpsSolution {
    pub fn is_feasible(&self) -> bool {
        self.status == CpsStatus::Feasible
    }

    /// CSV with header `id,M1,M2,q`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "id,M1,M2,q")?;
        for n in &self.nodes {
            writeln!(out, "{},{},{},{}", n.id, n.m[0], n.m[1], n.q)?;
        }
        Ok(())
    }
}

fn q_min(tree: &ScenarioTree) -> Vec<f64> {
    let sizes = tree.level_sizes();
    tree.nodes.iter().map(|n| Q_MIN_FRACTION / sizes[n.level] as f64).collect()
}

/// Relative violations of band, martingale and measure constraints.
pub fn residual(tree: &ScenarioTree, epsilon: f64, nodes: &[CpsNode]) -> f64 {
    let qmin = q_min(tree);
    let mut worst: f64 = (nodes[0].q - 1.0).abs();
    for (k, n) in nodes.iter().enumerate() {
        let s = tree.nodes[k].price;
        for nu in 0..2 {
            let lo = s[nu] / (1.0 + epsilon);
            let hi = (1.0 + epsilon) * s[nu];
            worst = worst.max((lo - n.m[nu]).max(n.m[nu] - hi).max(0.0) / s[nu]);
        }
        worst = worst.max((qmin[k] - n.q).max(0.0) / qmin[k]);
    }
    for (k, kids) in tree.children().iter().enumerate() {
        if kids.is_empty() {
            continue;
        }
        let q = nodes[k].q;
        let qs: f64 = kids.iter().map(|&c| nodes[c].q).sum();
        worst = worst.max((qs - q).abs() / q);
        for nu in 0..2 {
            let m = q * nodes[k].m[nu];
            let ms: f64 = kids.iter().map(|&c| nodes[c].q * nodes[c].m[nu]).sum();
            worst = worst.max((ms - m).abs() / m.abs().max(f64::MIN_POSITIVE));
        }
    }
    worst
}

/// Searches a measure `Q` and a `Q`-martingale `M` within the relative band
/// `[S/(1+ε), (1+ε)S]` at every node, as an LP in `(q, m = q·M)`.
pub fn find_cps(tree: &ScenarioTree, epsilon: f64) -> Result<CpsSolution, CpsError> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(CpsError::InvalidEpsilon(epsilon));
    }
    tree.validate()?;
    let qmin = q_min(tree);

    if tree.is_reference_martingale(MARTINGALE_TOL) && tree.nodes.iter().zip(&qmin).all(|(n, m)| n.weight >= *m) {
        let nodes: Vec<CpsNode> = tree
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| CpsNode {
                id,
                m: n.price,
                q: n.weight,
            })
            .collect();
        return Ok(CpsSolution {
            epsilon,
            status: CpsStatus::Feasible,
            max_residual: residual(tree, epsilon, &nodes),
            nodes,
            infeasibility: None,
            farkas_gap: None,
            farkas_residual: None,
            lp_pivots: 0,
        });
    }

    // variables per node k: 3k → q − q_min, 3k+1 → m¹, 3k+2 → m²
    let nv = 3 * tree.nodes.len();
    let smallest = qmin.iter().cloned().fold(f64::INFINITY, f64::min)
        * tree.nodes.iter().flat_map(|n| n.price).fold(f64::INFINITY, f64::min);
    let mut lp = Lp::new(nv).with_zero_scale(1e-6 * smallest / (1.0 + epsilon));
    lp.push(vec![(0, 1.0)], Cmp::Eq, 1.0 - qmin[0]);
    for (k, kids) in tree.children().iter().enumerate() {
        if kids.is_empty() {
            continue;
        }
        let mut q_row = vec![(3 * k, 1.0)];
        q_row.extend(kids.iter().map(|&c| (3 * c, -1.0)));
        let rhs: f64 = kids.iter().map(|&c| qmin[c]).sum::<f64>() - qmin[k];
        lp.push(q_row, Cmp::Eq, rhs);
        for nu in 1..=2 {
            let mut m_row = vec![(3 * k + nu, 1.0)];
            m_row.extend(kids.iter().map(|&c| (3 * c + nu, -1.0)));
            lp.push(m_row, Cmp::Eq, 0.0);
        }
    }
    let widen = 1.0 + epsilon;
    for (k, node) in tree.nodes.iter().enumerate() {
        for nu in 0..2 {
            let s = node.price[nu];
            lp.push(vec![(3 * k + 1 + nu, 1.0), (3 * k, -s / widen)], Cmp::Ge, s / widen * qmin[k]);
            lp.push(vec![(3 * k + 1 + nu, 1.0), (3 * k, -s * widen)], Cmp::Le, s * widen * qmin[k]);
        }
    }

    match solve_feasibility(&lp)? {
        LpOutcome::Feasible { x, pivots } => {
            let nodes = polish(tree, epsilon, &qmin, &x);
            Ok(CpsSolution {
                epsilon,
                status: CpsStatus::Feasible,
                max_residual: residual(tree, epsilon, &nodes),
                nodes,
                infeasibility: None,
                farkas_gap: None,
                farkas_residual: None,
                lp_pivots: pivots,
            })
        }
        LpOutcome::Infeasible {
            infeasibility,
            farkas_gap,
            farkas_residual,
            pivots,
        } => Ok(CpsSolution {
            epsilon,
            status: CpsStatus::Infeasible,
            nodes: Vec::new(),
            max_residual: f64::NAN,
            infeasibility: Some(infeasibility),
            farkas_gap: Some(farkas_gap),
            farkas_residual: Some(farkas_residual),
            lp_pivots: pivots,
        }),
    }
}

/// Rebuilds `(q, M)` from an LP point so that the constraints hold to
/// relative round-off even at nodes whose weight sits near `q_min`, where
/// the simplex tolerances are absolute.
///
/// `q` is redistributed top-down: each child gets its minimal admissible
/// weight plus a share of the parent's surplus proportional to its LP
/// surplus. Given `q`, the attainable values of `M` at a node form an
/// interval (the band intersected with the `q`-average of the children's
/// intervals), which is computed bottom-up and then sampled top-down.
fn polish(tree: &ScenarioTree, epsilon: f64, qmin: &[f64], x: &[f64]) -> Vec<CpsNode> {
    let n = tree.nodes.len();
    let kids = tree.children();
    let lp_q: Vec<f64> = (0..n).map(|k| x[3 * k].max(0.0) + qmin[k]).collect();

    let mut need = qmin.to_vec();
    for k in (0..n).rev() {
        let s: f64 = kids[k].iter().map(|&c| need[c]).sum();
        need[k] = need[k].max(s);
    }
    let mut q = vec![0.0; n];
    q[0] = 1.0;
    for k in 0..n {
        let cs = &kids[k];
        if cs.is_empty() {
            continue;
        }
        let floor: f64 = cs.iter().map(|&c| need[c]).sum();
        let surplus = (q[k] - floor).max(0.0);
        let lp_surplus: Vec<f64> = cs.iter().map(|&c| (lp_q[c] - need[c]).max(0.0)).collect();
        let total: f64 = lp_surplus.iter().sum();
        for (&c, s) in cs.iter().zip(&lp_surplus) {
            let share = if total > 0.0 { s / total } else { 1.0 / cs.len() as f64 };
            q[c] = need[c] + surplus * share;
        }
    }

    let widen = 1.0 + epsilon;
    let mut m = vec![[0.0; 2]; n];
    for nu in 0..2 {
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for k in (0..n).rev() {
            let s = tree.nodes[k].price[nu];
            let (mut a, mut b) = (s / widen, s * widen);
            if !kids[k].is_empty() {
                let qs: f64 = kids[k].iter().map(|&c| q[c]).sum();
                a = a.max(kids[k].iter().map(|&c| q[c] * lo[c]).sum::<f64>() / qs);
                b = b.min(kids[k].iter().map(|&c| q[c] * hi[c]).sum::<f64>() / qs);
            }
            if a > b {
                // empty only through LP round-off at the feasibility boundary
                let mid = 0.5 * (a + b);
                (a, b) = (mid, mid);
            }
            lo[k] = a;
            hi[k] = b;
        }
        m[0][nu] = tree.nodes[0].price[nu].clamp(lo[0], hi[0]);
        for k in 0..n {
            let cs = &kids[k];
            if cs.is_empty() {
                continue;
            }
            let qs: f64 = cs.iter().map(|&c| q[c]).sum();
            let low: f64 = cs.iter().map(|&c| q[c] * lo[c]).sum::<f64>() / qs;
            let high: f64 = cs.iter().map(|&c| q[c] * hi[c]).sum::<f64>() / qs;
            let alpha = if high > low { ((m[k][nu] - low) / (high - low)).clamp(0.0, 1.0) } else { 0.0 };
            for &c in cs {
                m[c][nu] = lo[c] + alpha * (hi[c] - lo[c]);
            }
        }
    }
    (0..n).map(|id| CpsNode { id, m: m[id], q: q[id] }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MinEps {
    /// Smallest feasible `ε` found, within [`EPS_TOL`] of the infimum.
    Found { epsilon: f64, solution: CpsSolution },
    /// No CPS even at the upper end of the search range.
    AboveHi { eps_hi: f64 },
}

/// Bisection on `ε ∈ [0, eps_hi]`; relies on feasibility being monotone.
pub fn min_eps_cps(tree: &ScenarioTree, eps_hi: f64) -> Result<MinEps, CpsError> {
    if !(eps_hi.is_finite() && eps_hi > 0.0) {
        return Err(CpsError::InvalidEpsilon(eps_hi));
    }
    let at_zero = find_cps(tree, 0.0)?;
    if at_zero.is_feasible() {
        return Ok(MinEps::Found {
            epsilon: 0.0,
            solution: at_zero,
        });
    }
    let mut best = find_cps(tree, eps_hi)?;
    if !best.is_feasible() {
        return Ok(MinEps::AboveHi { eps_hi });
    }
    let (mut lo, mut hi) = (0.0, eps_hi);
    while hi - lo > 0.25 * EPS_TOL {
        let mid = 0.5 * (lo + hi);
        let s = find_cps(tree, mid)?;
        if s.is_feasible() {
            hi = mid;
            best = s;
        } else {
            lo = mid;
        }
    }
    Ok(MinEps::Found {
        epsilon: hi,
        solution: best,
    })
}
