//! Consistent price systems on scenario trees.

pub mod lp;
pub mod solve;
pub mod tree;

use thiserror::Error;

use crate::sim::SimError;

pub use solve::{find_cps, min_eps_cps, residual, CpsNode, CpsSolution, CpsStatus, MinEps, EPS_TOL, Q_MIN_FRACTION};
pub use tree::{build_tree, ScenarioTree, TreeNode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CpsError {
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("epsilon must be finite and nonnegative, got {0}")]
    InvalidEpsilon(f64),
    #[error("LP solver failed: {0}")]
    Lp(#[from] lp::LpError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
