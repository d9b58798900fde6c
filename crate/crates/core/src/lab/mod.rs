//! Monte Carlo experiments: lead-lag exploitation under frictions and
//! empirical checks of the path properties behind the no-arbitrage results.

pub mod experiment;
pub mod properties;
pub mod stats;

use thiserror::Error;

use crate::sim::SimError;
use crate::strategy::StrategyError;

pub use experiment::{
    default_strategy_suite, make_lag_exploit_rule, make_random_rebalance_rule, run_cost_sweep, run_experiment,
    terminal_values, CostSweepReport, ExperimentReport, Provenance, DISCLAIMER,
};
pub use properties::{
    bridge_stay_probability, empirical_cud, empirical_small_ball, empirical_stickiness, Conditioning, CudCell,
    CudTable, Monitoring, SmallBallQuery,
};
pub use stats::{clopper_pearson, ArbStats, Proportion};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("conditioning event is empirically empty")]
    DegenerateEvent,
}

/// `exp(X)` with overflow reported against the path and grid index.
pub(crate) fn prices(x: &[[f64; 2]], path: usize) -> Result<Vec<[f64; 2]>, LabError> {
    x.iter()
        .enumerate()
        .map(|(i, v)| {
            let s = [v[0].exp(), v[1].exp()];
            if s[0].is_finite() && s[1].is_finite() && s[0] > 0.0 && s[1] > 0.0 {
                Ok(s)
            } else {
                Err(SimError::PriceOverflow { path, index: i }.into())
            }
        })
        .collect()
}
