//! Strict TOML configuration. Every table rejects unknown keys and no
//! physical parameter has a default.

use std::path::{Path, PathBuf};

use leadlag::cps::ScenarioTree;
use leadlag::lab::{make_lag_exploit_rule, make_random_rebalance_rule, Conditioning, Monitoring};
use leadlag::sim::{LagModelSpec, TimeGrid};
use leadlag::spectral::CrossSpectralDensity;
use leadlag::strategy::rules::{BuyAndHold, Momentum, NeverTrade};
use leadlag::strategy::{FrictionSpec, SimpleStrategy};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub n_paths: Option<usize>,
    pub grid: Option<GridConfig>,
    pub model: Option<LagModelSpec>,
    pub strategy: Option<StrategyConfig>,
    pub friction: Option<FrictionSpec>,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub outputs: Vec<OutputKind>,
    #[serde(default)]
    pub verifiers: Vec<VerifierConfig>,
    pub cps: Option<CpsConfig>,
    pub gsvz: Option<GsvzConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategyConfig {
    NeverTrade,
    BuyAndHold {
        position: [f64; 2],
    },
    LagExploit {
        lookback: f64,
        entry_threshold: f64,
        trade_interval: f64,
        position_size: f64,
    },
    Momentum {
        lookback: f64,
        trade_interval: f64,
        position_size: f64,
    },
    RandomRebalance {
        probability: f64,
        scale: f64,
    },
    /// The standard suite of exploit and random strategies.
    Suite,
}

impl StrategyConfig {
    pub fn build(&self, grid: &TimeGrid) -> Result<Vec<SimpleStrategy>, CliError> {
        let cfg = |e: leadlag::lab::LabError| CliError::config("strategy", e);
        let steps = |name: &str, v: f64| match leadlag::sim::grid::steps_in(v, grid.step) {
            Some(n) if n > 0 => Ok(n),
            _ => Err(CliError::config(
                "strategy",
                format!("{name}={v} must be a positive multiple of the grid step {}", grid.step),
            )),
        };
        Ok(match *self {
            Self::NeverTrade => vec![SimpleStrategy::new(NeverTrade)],
            Self::BuyAndHold { position } => {
                if position.iter().any(|p| !p.is_finite()) {
                    return Err(CliError::config("strategy", "position must be finite"));
                }
                vec![SimpleStrategy::new(BuyAndHold { position })]
            }
            Self::LagExploit {
                lookback,
                entry_threshold,
                trade_interval,
                position_size,
            } => vec![make_lag_exploit_rule(lookback, entry_threshold, trade_interval, position_size, grid).map_err(cfg)?],
            Self::Momentum {
                lookback,
                trade_interval,
                position_size,
            } => {
                if !position_size.is_finite() {
                    return Err(CliError::config("strategy", "position_size must be finite"));
                }
                vec![SimpleStrategy::new(Momentum {
                    lookback_steps: steps("lookback", lookback)?,
                    interval_steps: steps("trade_interval", trade_interval)?,
                    size: position_size,
                })]
            }
            Self::RandomRebalance { probability, scale } => {
                vec![make_random_rebalance_rule(probability, scale).map_err(cfg)?]
            }
            Self::Suite => leadlag::lab::default_strategy_suite(grid).map_err(cfg)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Cost rates, strictly increasing; replaces `friction.epsilon`.
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    /// Terminal value per path.
    TerminalValues,
    /// Value process on the grid per path.
    Values,
    /// Rebalance times and positions per path.
    Executions,
    /// Simulated log-prices and prices.
    Paths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetConfig {
    Zero,
    /// `target(t) = slope·(t − t0)`.
    Linear([f64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VerifierConfig {
    SmallBall {
        t0: f64,
        eps: f64,
        target: TargetConfig,
        components: Vec<usize>,
        monitoring: Monitoring,
    },
    Stickiness {
        t: f64,
        delta: f64,
        monitoring: Monitoring,
    },
    Cud {
        t1: f64,
        t2: f64,
        conditioning: Conditioning,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpsConfig {
    /// Upper end of the search for the minimal band.
    pub eps_hi: f64,
    /// Extra band widths at which to report feasibility.
    #[serde(default)]
    pub probe: Vec<f64>,
    /// Inline tree.
    pub tree: Option<ScenarioTree>,
    /// JSON tree file, relative to the config file.
    pub tree_file: Option<PathBuf>,
    /// Tree built from simulated paths: level times and bins per level.
    pub levels: Option<Vec<f64>>,
    pub bins: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GsvzConfig {
    pub density: CrossSpectralDensity,
    pub lambda0: f64,
}

/// Config text together with where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Config,
    pub path: PathBuf,
    pub text: String,
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(path.display().to_string(), format!("cannot read config: {e}")))?;
    let config = parse(&text).map_err(|e| CliError::config(path.display().to_string(), e))?;
    Ok(LoadedConfig {
        config,
        path: path.to_path_buf(),
        text,
    })
}

pub fn parse(text: &str) -> Result<Config, String> {
    let config: Config = toml::from_str(text).map_err(|e| e.to_string())?;
    // serde ignores extra keys next to the tag of a unit variant
    // (`kind = "zero"` plus anything), so compare against a round trip.
    let given: toml::Value = toml::from_str(text).map_err(|e| e.to_string())?;
    let kept = toml::Value::try_from(&config).map_err(|e| e.to_string())?;
    match dropped_key(&given, &kept, "") {
        Some(key) => Err(format!("unknown field `{key}`")),
        None => Ok(config),
    }
}

/// First key path present in `given` but absent from `kept`.
fn dropped_key(given: &toml::Value, kept: &toml::Value, at: &str) -> Option<String> {
    match (given, kept) {
        (toml::Value::Table(g), toml::Value::Table(k)) => g.iter().find_map(|(name, v)| {
            let path = if at.is_empty() { name.clone() } else { format!("{at}.{name}") };
            match k.get(name) {
                Some(kv) => dropped_key(v, kv, &path),
                None => Some(path),
            }
        }),
        (toml::Value::Array(g), toml::Value::Array(k)) => g
            .iter()
            .zip(k)
            .enumerate()
            .find_map(|(i, (gv, kv))| dropped_key(gv, kv, &format!("{at}[{i}]"))),
        _ => None,
    }
}

impl Config {
    pub fn require<'a, T>(field: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        field
            .as_ref()
            .ok_or_else(|| CliError::config(name, format!("missing required key `{name}`")))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        Self::require(&self.seed, "seed").copied()
    }

    pub fn n_paths(&self) -> Result<usize, CliError> {
        match self.n_paths {
            Some(0) => Err(CliError::config("n_paths", "n_paths must be >= 1")),
            Some(n) => Ok(n),
            None => Err(CliError::config("n_paths", "missing required key `n_paths`")),
        }
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        let g = Self::require(&self.grid, "grid")?;
        TimeGrid::new(g.horizon, g.step).map_err(|e| CliError::config("grid", e))
    }

    pub fn model(&self) -> Result<&LagModelSpec, CliError> {
        let m = Self::require(&self.model, "model")?;
        m.validate().map_err(|e| CliError::config("model", e))?;
        Ok(m)
    }

    pub fn friction(&self) -> Result<FrictionSpec, CliError> {
        let f = *Self::require(&self.friction, "friction")?;
        f.validate().map_err(|e| CliError::config("friction", e))?;
        Ok(f)
    }
}
