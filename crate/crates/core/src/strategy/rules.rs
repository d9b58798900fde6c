//! A small zoo of decision rules.

use super::rule::{Decision, DecisionContext, DecisionRule};

#[derive(Debug, Clone, Copy, Default)]
pub struct NeverTrade;

impl DecisionRule for NeverTrade {
    fn decide(&self, _: &DecisionContext<'_>) -> Decision {
        Decision::Hold
    }

    fn name(&self) -> String {
        "never_trade".into()
    }
}

/// Takes `position` at time 0 and keeps it.
#[derive(Debug, Clone, Copy)]
pub struct BuyAndHold {
    pub position: [f64; 2],
}

impl DecisionRule for BuyAndHold {
    fn decide(&self, ctx: &DecisionContext<'_>) -> Decision {
        if ctx.index == 0 {
            Decision::Rebalance(self.position)
        } else {
            Decision::Hold
        }
    }

    fn name(&self) -> String {
        format!("buy_and_hold({},{})", self.position[0], self.position[1])
    }
}

/// Proposes fixed targets at fixed grid indices, ignoring prices.
#[derive(Debug, Clone, Default)]
pub struct Scripted {
    pub proposals: Vec<(usize, [f64; 2])>,
}

impl DecisionRule for Scripted {
    fn decide(&self, ctx: &DecisionContext<'_>) -> Decision {
        self.proposals
            .iter()
            .find(|(i, _)| *i == ctx.index)
            .map_or(Decision::Hold, |(_, p)| Decision::Rebalance(*p))
    }

    fn name(&self) -> String {
        format!("scripted({} proposals)", self.proposals.len())
    }
}

/// Flips a long/short position in asset 1 every `every` steps.
#[derive(Debug, Clone, Copy)]
pub struct Alternating {
    pub every: usize,
    pub size: f64,
}

impl DecisionRule for Alternating {
    fn decide(&self, ctx: &DecisionContext<'_>) -> Decision {
        if ctx.index % self.every.max(1) != 0 {
            return Decision::Hold;
        }
        let sign = if (ctx.index / self.every.max(1)) % 2 == 0 { 1.0 } else { -1.0 };
        Decision::Rebalance([sign * self.size, 0.0])
    }

    fn name(&self) -> String {
        format!("alternating(every={},size={})", self.every, self.size)
    }
}

/// At each grid time, with probability `probability`, jumps to a position
/// drawn uniformly from `[−scale, scale]²`.
#[derive(Debug, Clone, Copy)]
pub struct RandomRebalance {
    pub probability: f64,
    pub scale: f64,
}

impl DecisionRule for RandomRebalance {
    fn decide(&self, ctx: &DecisionContext<'_>) -> Decision {
        if ctx.uniform(0) >= self.probability {
            return Decision::Hold;
        }
        let a = self.scale * (2.0 * ctx.uniform(1) - 1.0);
        let b = self.scale * (2.0 * ctx.uniform(2) - 1.0);
        Decision::Rebalance([a, b])
    }

    fn name(&self) -> String {
        format!("random_rebalance(p={},scale={})", self.probability, self.scale)
    }
}

/// Every `interval_steps`, trades the follower (asset 2) in the direction
/// of the leader's log-price move over the last `lookback_steps`; flat when
/// that move is at most `threshold` in magnitude.
#[derive(Debug, Clone, Copy)]
pub struct LagExploit {
    pub lookback_steps: usize,
    pub interval_steps: usize,
    pub threshold: f64,
    pub size: f64,
}

impl DecisionRule for LagExploit {
    fn decide(&self, ctx: &DecisionContext<'_>) -> Decision {
        if ctx.index % self.interval_steps != 0 {
            return Decision::Hold;
        }
        let from = ctx.index.saturating_sub(self.lookback_steps);
        let move_ = ctx.x[ctx.index][0] - ctx.x[from][0];
        if move_.abs() > self.threshold {
            Decision::Rebalance([0.0, move_.signum() * self.size])
        } else {
            Decision::Rebalance([0.0, 0.0])
        }
    }

    fn name(&self) -> String {
        format!(
            "lag_exploit(lookback_steps={},interval_steps={},threshold={},size={})",
            self.lookback_steps, self.interval_steps, self.threshold, self.size
        )
    }
}

/// Own-asset trend following on asset 2.
#[derive(Debug, Clone, Copy)]
pub struct Momentum {
    pub lookback_steps: usize,
    pub interval_steps: usize,
    pub size: f64,
}

impl DecisionRule for Momentum {
    fn decide(&self, ctx: &DecisionContext<'_>) -> Decision {
        if ctx.index % self.interval_steps != 0 || ctx.index < self.lookback_steps {
            return Decision::Hold;
        }
        let move_ = ctx.x[ctx.index][1] - ctx.x[ctx.index - self.lookback_steps][1];
        Decision::Rebalance([0.0, move_.signum() * self.size])
    }

    fn name(&self) -> String {
        format!(
            "momentum(lookback_steps={},interval_steps={},size={})",
            self.lookback_steps, self.interval_steps, self.size
        )
    }
}
