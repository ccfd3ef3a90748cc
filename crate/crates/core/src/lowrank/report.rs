use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::AlgoConfig;
use crate::exact::SpectralData;
use crate::lowrank::LowRankFactor;
use crate::oracle::PsdOracle;
use crate::rng::Seed;

/// Per-run telemetry.
///
/// `ratio` is normalised so that the target guarantee always reads
/// `ratio ≤ 1 + eps`: Frobenius runs divide by `‖A − A_k‖_F²`, spectral runs by
/// `λ_{k+1}² + ε/(k(1+ε))·‖A − A_k‖_F²`, ridge runs by the exact optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub seed: u64,
    pub accesses: u64,
    pub wall_ms: f64,
    pub frob_err_sq: Option<f64>,
    pub spec_err_sq: Option<f64>,
    pub opt_frob_tail_sq: Option<f64>,
    pub opt_spec_tail_sq: Option<f64>,
    pub ratio: Option<f64>,
    pub constants: AlgoConfig,
    pub retries: u32,
    pub flags: Vec<String>,
    pub sample_sizes: BTreeMap<String, u64>,
    pub details: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new(algorithm: &str, n: usize, k: usize, eps: f64, seed: Seed, config: &AlgoConfig) -> Self {
        RunReport {
            algorithm: algorithm.to_string(),
            n,
            k,
            eps,
            seed: seed.0,
            accesses: 0,
            wall_ms: 0.0,
            frob_err_sq: None,
            spec_err_sq: None,
            opt_frob_tail_sq: None,
            opt_spec_tail_sq: None,
            ratio: None,
            constants: *config,
            retries: 0,
            flags: Vec::new(),
            sample_sizes: BTreeMap::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn flag(&mut self, name: &str) {
        if !self.has_flag(name) {
            self.flags.push(name.to_string());
        }
    }

    pub fn has_flag(&self, name: &str) -> bool {
        self.flags.iter().any(|f| f == name)
    }

    pub fn size(&mut self, name: &str, value: usize) {
        self.sample_sizes.insert(name.to_string(), value as u64);
    }

    pub fn detail(&mut self, name: &str, value: f64) {
        self.details.insert(name.to_string(), value);
    }

    /// Fills the error fields against the exact matrix, with a Frobenius ratio.
    pub fn evaluate_frobenius(&mut self, a: &DMatrix<f64>, spectrum: &SpectralData, factor: &LowRankFactor) {
        self.fill_errors(a, spectrum, factor);
        let tail = spectrum.frob_tail_sq(self.k);
        self.ratio = normalised(self.frob_err_sq.unwrap(), tail, a.norm_squared());
    }

    /// Fills the error fields against the exact matrix, with a spectral ratio.
    pub fn evaluate_spectral(&mut self, a: &DMatrix<f64>, spectrum: &SpectralData, factor: &LowRankFactor) {
        self.fill_errors(a, spectrum, factor);
        let reference = spectral_reference(spectrum, self.k, self.eps);
        self.ratio = normalised(self.spec_err_sq.unwrap(), reference, spectrum.eigenvalues[0].powi(2));
    }

    fn fill_errors(&mut self, a: &DMatrix<f64>, spectrum: &SpectralData, factor: &LowRankFactor) {
        self.frob_err_sq = Some(factor.frob_err_sq(a));
        self.spec_err_sq = Some(factor.spec_err_sq(a));
        self.opt_frob_tail_sq = Some(spectrum.frob_tail_sq(self.k));
        self.opt_spec_tail_sq = Some(spectrum.spec_tail_sq(self.k));
    }

    /// Drops wall-clock time so that repeated runs serialise identically.
    pub fn without_wall_time(mut self) -> Self {
        self.wall_ms = 0.0;
        self
    }

    /// JSON with every float written to 17 significant digits; `null` for
    /// missing or non-finite values. Keys are sorted.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serialises");
        let mut out = String::new();
        write_json(&value, 0, &mut out);
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// `λ_{k+1}² + ε/(k(1+ε))·‖A − A_k‖_F²`, scaled so that the spectral bound
/// `(1+ε)λ_{k+1}² + (ε/k)‖A − A_k‖_F²` equals `(1+ε)` times it.
pub fn spectral_reference(spectrum: &SpectralData, k: usize, eps: f64) -> f64 {
    spectrum.spec_tail_sq(k) + eps / (k as f64 * (1.0 + eps)) * spectrum.frob_tail_sq(k)
}

fn normalised(attained: f64, reference: f64, scale: f64) -> Option<f64> {
    if reference > 1e-14 * scale {
        Some(attained / reference)
    } else if attained <= 1e-8 * scale {
        Some(1.0)
    } else {
        None
    }
}

/// Access counter and wall clock for one run.
pub(crate) struct RunClock {
    start: Instant,
    accesses: u64,
}

impl RunClock {
    pub(crate) fn start(oracle: &PsdOracle) -> Self {
        RunClock { start: Instant::now(), accesses: oracle.accesses() }
    }

    pub(crate) fn finish(&self, oracle: &PsdOracle, report: &mut RunReport) {
        report.accesses = oracle.accesses() - self.accesses;
        report.wall_ms = self.start.elapsed().as_secs_f64() * 1e3;
    }
}

/// 17 significant digits, `null` when non-finite.
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return "null".to_string();
    }
    format!("{x:.16e}")
}

fn write_json(v: &Value, indent: usize, out: &mut String) {
    let pad = |out: &mut String, level: usize| {
        for _ in 0..level {
            out.push_str("  ");
        }
    };
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(num) => {
            if let Some(u) = num.as_u64() {
                let _ = write!(out, "{u}");
            } else if let Some(i) = num.as_i64() {
                let _ = write!(out, "{i}");
            } else {
                out.push_str(&format_f64(num.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serialises")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (idx, item) in items.iter().enumerate() {
                pad(out, indent + 1);
                write_json(item, indent + 1, out);
                if idx + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (idx, (key, item)) in map.iter().enumerate() {
                pad(out, indent + 1);
                out.push_str(&serde_json::to_string(key).expect("key serialises"));
                out.push_str(": ");
                write_json(item, indent + 1, out);
                if idx + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

/// Writes a JSON value with the report number format.
pub fn value_to_json(v: &Value) -> String {
    let mut out = String::new();
    write_json(v, 0, &mut out);
    out.push('\n');
    out
}
