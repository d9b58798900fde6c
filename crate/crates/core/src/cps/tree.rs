use std::io::Write;

use serde::{Deserialize, Serialize};

use super::CpsError;
use crate::sim::PathBatch;

/// Tolerance on per-level weight sums and parent consistency.
pub const WEIGHT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeNode {
    pub level: usize,
    /// Index of the parent node; `None` only for the root.
    pub parent: Option<usize>,
    pub price: [f64; 2],
    /// Unconditional reference probability.
    pub weight: f64,
}

/// Finite scenario tree. Node ids are positions in `nodes`, sorted by level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTree {
    pub times: Vec<f64>,
    pub nodes: Vec<TreeNode>,
}

impl ScenarioTree {
    pub fn n_levels(&self) -> usize {
        self.times.len()
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (id, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                out[p].push(id);
            }
        }
        out
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_levels()];
        for n in &self.nodes {
            sizes[n.level] += 1;
        }
        sizes
    }

    pub fn validate(&self) -> Result<(), CpsError> {
        let bad = |msg: String| Err(CpsError::InvalidTree(msg));
        if self.times.is_empty() || self.times.windows(2).any(|w| w[1] <= w[0]) {
            return bad("times must be nonempty and strictly increasing".into());
        }
        if self.nodes.first().map(|n| (n.level, n.parent)) != Some((0, None)) {
            return bad("node 0 must be the root at level 0".into());
        }
        let last = self.n_levels() - 1;
        for (id, n) in self.nodes.iter().enumerate().skip(1) {
            let Some(p) = n.parent else {
                return bad(format!("node {id} has no parent; only one root is allowed"));
            };
            if p >= id || n.level == 0 || n.level > last || self.nodes[p].level + 1 != n.level {
                return bad(format!("node {id} at level {} has invalid parent {p}", n.level));
            }
            if n.level < self.nodes[id - 1].level {
                return bad("nodes must be sorted by level".into());
            }
        }
        for (id, n) in self.nodes.iter().enumerate() {
            if !(n.price.iter().all(|v| v.is_finite() && *v > 0.0)) {
                return bad(format!("node {id} has a nonpositive price"));
            }
            if !(n.weight.is_finite() && n.weight > 0.0) {
                return bad(format!("node {id} has a nonpositive reference weight"));
            }
        }
        let mut sums = vec![0.0; self.n_levels()];
        for n in &self.nodes {
            sums[n.level] += n.weight;
        }
        if let Some((l, s)) = sums.iter().enumerate().find(|(_, s)| (**s - 1.0).abs() > WEIGHT_TOL) {
            return bad(format!("weights at level {l} sum to {s}"));
        }
        for (id, kids) in self.children().iter().enumerate() {
            let level = self.nodes[id].level;
            if kids.is_empty() {
                if level != last {
                    return bad(format!("node {id} at level {level} has no children"));
                }
                continue;
            }
            let s: f64 = kids.iter().map(|&c| self.nodes[c].weight).sum();
            if (s - self.nodes[id].weight).abs() > WEIGHT_TOL {
                return bad(format!("children of node {id} carry weight {s}, node has {}", self.nodes[id].weight));
            }
        }
        Ok(())
    }

    /// `S` is a martingale under the reference weights, to relative `tol`.
    pub fn is_reference_martingale(&self, tol: f64) -> bool {
        self.children().iter().enumerate().all(|(id, kids)| {
            if kids.is_empty() {
                return true;
            }
            let node = &self.nodes[id];
            (0..2).all(|nu| {
                let mean: f64 = kids.iter().map(|&c| self.nodes[c].weight * self.nodes[c].price[nu]).sum::<f64>()
                    / node.weight;
                (mean - node.price[nu]).abs() <= tol * node.price[nu]
            })
        })
    }

    /// CSV with header `level,id,parent,S1,S2,ref_weight`; the root's
    /// parent is empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "level,id,parent,S1,S2,ref_weight")?;
        for (id, n) in self.nodes.iter().enumerate() {
            let parent = n.parent.map_or(String::new(), |p| p.to_string());
            writeln!(out, "{},{id},{parent},{},{},{}", n.level, n.price[0], n.price[1], n.weight)?;
        }
        Ok(())
    }

    /// A single path as a chain tree.
    pub fn chain(times: Vec<f64>, prices: Vec<[f64; 2]>) -> Self {
        let nodes = prices
            .into_iter()
            .enumerate()
            .map(|(level, price)| TreeNode {
                level,
                parent: level.checked_sub(1),
                price,
                weight: 1.0,
            })
            .collect();
        Self { times, nodes }
    }
}

/// Marginal quantile bin of every value, with the bin count lowered until
/// no bin is empty.
fn quantile_bins(values: &[f64], max_bins: usize) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    for k in (1..=max_bins.max(1)).rev() {
        let edges: Vec<f64> = (1..k).map(|j| sorted[j * n / k]).collect();
        let bins: Vec<usize> = values.iter().map(|v| edges.partition_point(|e| e <= v)).collect();
        let mut counts = vec![0usize; k];
        for &b in &bins {
            counts[b] += 1;
        }
        if counts.iter().all(|&c| c > 0) {
            return bins;
        }
    }
    vec![0; values.len()]
}

fn log_spread(values: &[f64]) -> f64 {
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let (m, _) = crate::sim::mean_and_stderr(&logs);
    logs.iter().map(|l| (l - m).powi(2)).sum::<f64>()
}

/// Clusters paths into a tree. Each level after the first is binned on a
/// product grid of marginal quantiles of `(S¹, S²)`: `⌊√bins⌋` bins for the
/// component with the smaller log-price spread, `bins / ⌊√bins⌋` for the
/// other. A node's parent is the previous-level node holding most of its
/// paths (ties to the lower id). Leaf weights are path frequencies and
/// inner weights are sums over children; nodes without descendants at the
/// last level are dropped. Node prices are cluster means.
pub fn build_tree(batch: &PathBatch, levels: &[f64], bins: &[usize]) -> Result<ScenarioTree, CpsError> {
    let prices = batch.s.as_ref().ok_or_else(|| CpsError::InvalidTree("batch has no prices".into()))?;
    if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CpsError::InvalidTree("levels must be nonempty and strictly increasing".into()));
    }
    if bins.is_empty() || bins.contains(&0) || (bins.len() != 1 && bins.len() != levels.len()) {
        return Err(CpsError::InvalidTree(
            "bins must be >= 1, either one value or one per level".into(),
        ));
    }
    let idx = levels
        .iter()
        .map(|&t| batch.grid.index_of(t))
        .collect::<Result<Vec<_>, _>>()?;
    let n = batch.n_points();
    let n_paths = batch.n_paths;
    let value = |p: usize, l: usize| prices[p * n + idx[l]];

    // cluster[l][p]: cluster of path p at level l, clusters numbered 0.. per level
    let mut cluster: Vec<Vec<usize>> = Vec::with_capacity(levels.len());
    let mut n_clusters = Vec::with_capacity(levels.len());
    for l in 0..levels.len() {
        if l == 0 {
            cluster.push(vec![0; n_paths]);
            n_clusters.push(1);
            continue;
        }
        let b = if bins.len() == 1 { bins[0] } else { bins[l] };
        let minor = (b as f64).sqrt().floor() as usize;
        let major = b / minor;
        let s1: Vec<f64> = (0..n_paths).map(|p| value(p, l)[0]).collect();
        let s2: Vec<f64> = (0..n_paths).map(|p| value(p, l)[1]).collect();
        let (k1, k2) = if log_spread(&s1) >= log_spread(&s2) { (major, minor) } else { (minor, major) };
        let c1 = quantile_bins(&s1, k1);
        let c2 = quantile_bins(&s2, k2);
        let cells: Vec<usize> = c1.iter().zip(&c2).map(|(a, b)| a * k2 + b).collect();
        let mut used: Vec<usize> = cells.clone();
        used.sort_unstable();
        used.dedup();
        cluster.push(cells.iter().map(|c| used.binary_search(c).expect("present")).collect());
        n_clusters.push(used.len());
    }

    // parents by majority vote
    let mut parent: Vec<Vec<usize>> = vec![Vec::new()];
    for l in 1..levels.len() {
        let mut votes = vec![vec![0usize; n_clusters[l - 1]]; n_clusters[l]];
        for p in 0..n_paths {
            votes[cluster[l][p]][cluster[l - 1][p]] += 1;
        }
        parent.push(
            votes
                .iter()
                .map(|v| {
                    let best = *v.iter().max().expect("nonempty");
                    v.iter().position(|&c| c == best).expect("max exists")
                })
                .collect(),
        );
    }

    // weights bottom-up
    let last = levels.len() - 1;
    let mut weight: Vec<Vec<f64>> = n_clusters.iter().map(|&k| vec![0.0; k]).collect();
    for p in 0..n_paths {
        weight[last][cluster[last][p]] += 1.0 / n_paths as f64;
    }
    for l in (1..=last).rev() {
        for c in 0..n_clusters[l] {
            let w = weight[l][c];
            weight[l - 1][parent[l][c]] += w;
        }
    }

    // centroids
    let mut centroid: Vec<Vec<[f64; 2]>> = n_clusters.iter().map(|&k| vec![[0.0; 2]; k]).collect();
    let mut counts: Vec<Vec<usize>> = n_clusters.iter().map(|&k| vec![0; k]).collect();
    for l in 0..levels.len() {
        for p in 0..n_paths {
            let c = cluster[l][p];
            let v = value(p, l);
            centroid[l][c][0] += v[0];
            centroid[l][c][1] += v[1];
            counts[l][c] += 1;
        }
        for (c, k) in centroid[l].iter_mut().zip(&counts[l]) {
            c[0] /= *k as f64;
            c[1] /= *k as f64;
        }
    }

    // emit nodes with positive weight, level by level
    let mut id_of: Vec<Vec<Option<usize>>> = n_clusters.iter().map(|&k| vec![None; k]).collect();
    let mut nodes = Vec::new();
    for l in 0..levels.len() {
        for c in 0..n_clusters[l] {
            if weight[l][c] <= 0.0 {
                continue;
            }
            let parent_id = if l == 0 { None } else { id_of[l - 1][parent[l][c]] };
            id_of[l][c] = Some(nodes.len());
            nodes.push(TreeNode {
                level: l,
                parent: parent_id,
                price: centroid[l][c],
                weight: weight[l][c],
            });
        }
    }
    let tree = ScenarioTree {
        times: levels.to_vec(),
        nodes,
    };
    tree.validate()?;
    Ok(tree)
}
