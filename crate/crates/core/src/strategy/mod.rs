//! Simple trading strategies on simulated grids: execution under a minimal
//! waiting time, and value processes with and without proportional costs.

pub mod execute;
pub mod rule;
pub mod rules;
pub mod value;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use execute::{execute, execute_path, rule_key, validate_cheridito, CheriditoReport, PathExecution, StrategyExecution};
pub use rule::{Decision, DecisionContext, DecisionRule, SimpleStrategy};
pub use value::{
    check_admissible, check_admissible_path, gains_path, total_variation, total_variation_path, value_frictionless,
    value_frictionless_path, value_with_costs, value_with_costs_path, AdmissibilityReport, ValuePaths,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("rule returned a non-finite position on path {path} at t={t}")]
    NonFinitePosition { path: usize, t: f64 },
    #[error("batch has no prices; call to_prices first")]
    MissingPrices,
    #[error("nonpositive price on path {path} at grid index {index}")]
    NonPositivePrice { path: usize, index: usize },
    #[error("invalid friction: {0}")]
    InvalidFriction(String),
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("execution does not match the batch: {0}")]
    Mismatch(String),
}

/// Lower bound imposed on the value process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Admissibility {
    #[default]
    None,
    /// `V_t ≥ −m`.
    Uniform { m: f64 },
    /// `V_t ≥ −m (1 + S¹_t + S²_t)`.
    NumeraireFree { m: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionSpec {
    /// Minimal waiting time between rebalances.
    pub h: f64,
    /// Proportional cost rate.
    pub epsilon: f64,
    #[serde(default)]
    pub admissibility: Admissibility,
}

impl Default for FrictionSpec {
    fn default() -> Self {
        Self::frictionless()
    }
}

impl FrictionSpec {
    pub fn frictionless() -> Self {
        Self {
            h: 0.0,
            epsilon: 0.0,
            admissibility: Admissibility::None,
        }
    }

    pub fn with_waiting_time(h: f64) -> Self {
        Self { h, ..Self::frictionless() }
    }

    pub fn with_costs(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::frictionless()
        }
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        let m = match self.admissibility {
            Admissibility::None => 1.0,
            Admissibility::Uniform { m } | Admissibility::NumeraireFree { m } => m,
        };
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if ok(self.h) && ok(self.epsilon) && ok(m) && m > 0.0 {
            Ok(())
        } else {
            Err(StrategyError::InvalidFriction(format!(
                "h={}, epsilon={}, M={m} must be finite and nonnegative (M > 0)",
                self.h, self.epsilon
            )))
        }
    }
}
