use std::fmt;
use std::sync::Arc;

/// What a rule wants to do at the current grid time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    Hold,
    Rebalance([f64; 2]),
}

/// Everything a rule may look at. Histories end at the current grid index,
/// so a rule cannot read the future.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub index: usize,
    pub t: f64,
    pub step: f64,
    /// Log-prices on `0..=index`.
    pub x: &'a [[f64; 2]],
    /// Prices on `0..=index`.
    pub s: &'a [[f64; 2]],
    pub position: [f64; 2],
    pub last_rebalance: f64,
    pub rebalances: usize,
    /// Key identifying the path, for rules that randomize.
    pub path_key: u64,
}

impl DecisionContext<'_> {
    /// Uniform on `[0, 1)`, a fixed function of `(path_key, index, salt)`.
    pub fn uniform(&self, salt: u64) -> f64 {
        let mut z = self.path_key ^ (self.index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt.rotate_left(29);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }
}

pub trait DecisionRule: Send + Sync {
    fn decide(&self, ctx: &DecisionContext<'_>) -> Decision;

    fn name(&self) -> String;
}

/// A decision rule together with its rebalance budget.
#[derive(Clone)]
pub struct SimpleStrategy {
    pub rule: Arc<dyn DecisionRule>,
    /// Bound on rebalances after the initial position.
    pub max_rebalances: usize,
    /// Close any open position at the horizon when the waiting time allows.
    pub flatten_at_horizon: bool,
}

impl fmt::Debug for SimpleStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimpleStrategy")
            .field("rule", &self.rule.name())
            .field("max_rebalances", &self.max_rebalances)
            .field("flatten_at_horizon", &self.flatten_at_horizon)
            .finish()
    }
}

impl SimpleStrategy {
    pub fn new(rule: impl DecisionRule + 'static) -> Self {
        Self {
            rule: Arc::new(rule),
            max_rebalances: usize::MAX,
            flatten_at_horizon: false,
        }
    }

    pub fn with_max_rebalances(mut self, n: usize) -> Self {
        self.max_rebalances = n;
        self
    }

    pub fn flattening(mut self) -> Self {
        self.flatten_at_horizon = true;
        self
    }

    pub fn name(&self) -> String {
        self.rule.name()
    }
}
