use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

/// Two-sided confidence level used for every interval reported by the lab.
pub const CONFIDENCE: f64 = 0.99;
/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.575_829_303_548_900_4;

/// Exact binomial interval for `k` successes out of `n`.
pub fn clopper_pearson(k: u64, n: u64, confidence: f64) -> (f64, f64) {
    assert!(k <= n && n > 0, "need 0 <= k <= n, n > 0");
    let alpha = 1.0 - confidence;
    let (k, n) = (k as f64, n as f64);
    let lo = if k == 0.0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).expect("valid shape").inverse_cdf(alpha / 2.0)
    };
    let hi = if k == n {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).expect("valid shape").inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    ClopperPearson,
    /// Normal approximation, used for averaged (non-binary) estimators.
    Normal,
}

/// A probability estimate with its 99% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub n: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: IntervalMethod,
}

impl Proportion {
    pub fn from_counts(k: u64, n: u64) -> Self {
        let p = k as f64 / n as f64;
        let (ci_low, ci_high) = clopper_pearson(k, n, CONFIDENCE);
        Self {
            n,
            estimate: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
            ci_low,
            ci_high,
            method: IntervalMethod::ClopperPearson,
        }
    }

    /// Mean of per-path probabilities in `[0, 1]`.
    pub fn from_mean(samples: &[f64]) -> Self {
        let (mean, stderr) = crate::sim::mean_and_stderr(samples);
        Self {
            n: samples.len() as u64,
            estimate: mean,
            stderr,
            ci_low: (mean - Z99 * stderr).max(0.0),
            ci_high: (mean + Z99 * stderr).min(1.0),
            method: IntervalMethod::Normal,
        }
    }

    /// True when the 99% interval excludes zero.
    pub fn positive(&self) -> bool {
        self.ci_low > 0.0
    }
}

/// Empirical surrogates of `P(V_T ≥ 0) = 1` and `P(V_T > 0) > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbStats {
    pub n_paths: u64,
    pub mean: f64,
    pub stderr: f64,
    /// `None` when the standard error vanishes.
    pub t_stat: Option<f64>,
    pub loss: Proportion,
    pub gain: Proportion,
    pub min: f64,
    pub max: f64,
}

impl ArbStats {
    /// Statistics of terminal values, reduced in index order.
    pub fn from_terminal(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "no terminal values");
        let n = values.len() as u64;
        let (mean, stderr) = crate::sim::mean_and_stderr(values);
        let losses = values.iter().filter(|v| **v < 0.0).count() as u64;
        let gains = values.iter().filter(|v| **v > 0.0).count() as u64;
        Self {
            n_paths: n,
            mean,
            stderr,
            t_stat: (stderr > 0.0).then(|| mean / stderr),
            loss: Proportion::from_counts(losses, n),
            gain: Proportion::from_counts(gains, n),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub const CSV_HEADER: &'static str =
        "n_paths,mean,stderr,t_stat,loss_fraction,loss_ci_low,loss_ci_high,gain_fraction,gain_ci_low,gain_ci_high,min,max";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n_paths,
            self.mean,
            self.stderr,
            self.t_stat.map_or(String::new(), |t| t.to_string()),
            self.loss.estimate,
            self.loss.ci_low,
            self.loss.ci_high,
            self.gain.estimate,
            self.gain.ci_low,
            self.gain.ci_high,
            self.min,
            self.max
        )
    }
}
