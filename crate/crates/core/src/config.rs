use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tunable constants of the sampling pipelines.
///
/// Sample sizes keep the asymptotic shapes (`t₁ ∝ log n · Σℓ / ε²` and so on);
/// these multipliers only fix the leading constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoConfig {
    /// `c` in `k₁ = ⌈c·k/ε⌉` (Frobenius) and `⌈c·k/ε²⌉` (spectral).
    pub c_rank: f64,
    /// `c'`: the second score family is taken at rank `c'·k₁`.
    pub c_prime: f64,
    /// Oversampling in the recursive score estimator and in column sketches.
    pub c_sample: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    /// Spectral-error counterparts of `c1`–`c4`: column and row sketch sizes,
    /// then the two leverage-sampled regressions.
    pub c1_spec: f64,
    pub c2_spec: f64,
    pub c3_spec: f64,
    pub c4_spec: f64,
    /// Include the `log n` (resp. `log(k/δ)`) factor in sample sizes.
    pub oversample_log: bool,
    pub failure_delta: f64,
    /// `c` in the ridge rank `k = ⌈c·s̃_λ/ε²⌉`.
    pub c_ridge: f64,
    /// Constant accuracy used by inner spectral runs (PSD output, ridge).
    pub inner_eps: f64,
    /// Multiplier of the PSD-output rank `m = ⌈c·k/ε⌉` and its sample size.
    pub c_psd: f64,
    /// Multiplier of the square-root baseline's column count.
    pub c_baseline: f64,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        AlgoConfig {
            c_rank: 1.0,
            c_prime: 1.0,
            c_sample: 0.6,
            c1: 0.05,
            c2: 0.2,
            c3: 2.0,
            c4: 0.1,
            c5: 3.0,
            c1_spec: 0.004,
            c2_spec: 0.004,
            c3_spec: 0.5,
            c4_spec: 1.0,
            oversample_log: true,
            failure_delta: 0.01,
            c_ridge: 0.25,
            inner_eps: 1.0,
            c_psd: 1.5,
            c_baseline: 0.03,
        }
    }
}

/// Names accepted by [`AlgoConfig::set`], in declaration order.
pub const CONSTANT_NAMES: [&str; 18] = [
    "c_rank",
    "c_prime",
    "c_sample",
    "c1",
    "c2",
    "c3",
    "c4",
    "c5",
    "c1_spec",
    "c2_spec",
    "c3_spec",
    "c4_spec",
    "oversample_log",
    "failure_delta",
    "c_ridge",
    "inner_eps",
    "c_psd",
    "c_baseline",
];

impl AlgoConfig {
    pub fn validate(&self) -> Result<()> {
        let mults = [
            ("c_rank", self.c_rank),
            ("c_prime", self.c_prime),
            ("c_sample", self.c_sample),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("c4", self.c4),
            ("c5", self.c5),
            ("c1_spec", self.c1_spec),
            ("c2_spec", self.c2_spec),
            ("c3_spec", self.c3_spec),
            ("c4_spec", self.c4_spec),
            ("c_ridge", self.c_ridge),
            ("c_psd", self.c_psd),
            ("c_baseline", self.c_baseline),
        ];
        for (name, v) in mults {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("constant {name} must be positive, got {v}")));
            }
        }
        if !(self.failure_delta > 0.0 && self.failure_delta < 1.0) {
            return Err(Error::validation(format!("failure_delta must lie in (0, 1), got {}", self.failure_delta)));
        }
        if !(self.inner_eps > 0.0 && self.inner_eps <= 1.0) {
            return Err(Error::validation(format!("inner_eps must lie in (0, 1], got {}", self.inner_eps)));
        }
        Ok(())
    }

    /// `ln x` when log oversampling is on (never below 1), else 1.
    pub fn log_factor(&self, x: f64) -> f64 {
        if self.oversample_log {
            x.ln().max(1.0)
        } else {
            1.0
        }
    }

    pub fn set(&mut self, name: &str, value: &str) -> Result<()> {
        let num = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::validation(format!("constant {name}: cannot parse {value:?} as a number")))
        };
        match name {
            "c_rank" => self.c_rank = num()?,
            "c_prime" => self.c_prime = num()?,
            "c_sample" => self.c_sample = num()?,
            "c1" => self.c1 = num()?,
            "c2" => self.c2 = num()?,
            "c3" => self.c3 = num()?,
            "c4" => self.c4 = num()?,
            "c5" => self.c5 = num()?,
            "c1_spec" => self.c1_spec = num()?,
            "c2_spec" => self.c2_spec = num()?,
            "c3_spec" => self.c3_spec = num()?,
            "c4_spec" => self.c4_spec = num()?,
            "oversample_log" => {
                self.oversample_log = value
                    .parse::<bool>()
                    .map_err(|_| Error::validation(format!("oversample_log: expected true or false, got {value:?}")))?
            }
            "failure_delta" => self.failure_delta = num()?,
            "c_ridge" => self.c_ridge = num()?,
            "inner_eps" => self.inner_eps = num()?,
            "c_psd" => self.c_psd = num()?,
            "c_baseline" => self.c_baseline = num()?,
            _ => return Err(Error::validation(format!("unknown constant {name:?}"))),
        }
        self.validate()
    }
}

pub fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("eps must lie in (0, 1], got {eps}")))
    }
}
