use nalgebra::DMatrix;

use crate::config::{check_eps, AlgoConfig};
use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, orthonormal_basis, qr_basis, svd};
use crate::lowrank::report::{RunClock, RunReport};
use crate::lowrank::steps::{column_span, constrained_rank_k_regression, sampled_regression, sketch_rank_span};
use crate::lowrank::{check_pipeline_rank, dense_exact, is_zero, with_retries, LowRankFactor};
use crate::oracle::PsdOracle;
use crate::pcp::{mixed_column_sampling, row_rank, row_sample, RowMode};
use crate::rng::Seed;
use crate::sampling::{row_norm_scores, sample_or_dense, sample_size, Provenance, SampleSet};

/// Intermediate objects of one Frobenius run, for checking the guarantee chain.
#[derive(Debug, Clone)]
pub struct FrobeniusTrace {
    pub s1: SampleSet,
    /// Orthonormal `t₁ × k₁` span of the row sketch.
    pub z: DMatrix<f64>,
    /// Orthonormal `n × r` output basis, `r ≤ k`.
    pub q: DMatrix<f64>,
}

/// Rank-`k` approximation `Q·Nᵀ` with `‖A − QNᵀ‖_F² ≤ (1+ε)‖A − A_k‖_F²`,
/// reading a sublinear number of entries.
pub fn algorithm1_frobenius(
    oracle: &PsdOracle,
    k: usize,
    eps: f64,
    config: &AlgoConfig,
    seed: Seed,
) -> Result<(LowRankFactor, RunReport)> {
    algorithm1_frobenius_traced(oracle, k, eps, config, seed).map(|(f, r, _)| (f, r))
}

pub fn algorithm1_frobenius_traced(
    oracle: &PsdOracle,
    k: usize,
    eps: f64,
    config: &AlgoConfig,
    seed: Seed,
) -> Result<(LowRankFactor, RunReport, Option<FrobeniusTrace>)> {
    config.validate()?;
    check_eps(eps)?;
    let n = oracle.n();
    check_pipeline_rank(k, n)?;
    let clock = RunClock::start(oracle);
    let mut report = RunReport::new("algorithm1_frobenius", n, k, eps, seed, config);
    let ((factor, trace), retries) = with_retries(seed, |s| run_once(oracle, k, eps, config, s, &mut report))?;
    report.retries = retries;
    clock.finish(oracle, &mut report);
    Ok((factor, report, trace))
}

fn run_once(
    oracle: &PsdOracle,
    k: usize,
    eps: f64,
    config: &AlgoConfig,
    seed: Seed,
    report: &mut RunReport,
) -> Result<(LowRankFactor, Option<FrobeniusTrace>)> {
    let n = oracle.n();
    let before = oracle.accesses();
    if is_zero(oracle) {
        report.flag("zero_matrix");
        return Ok((LowRankFactor::zero(n), None));
    }
    let k1 = row_rank(k, eps, RowMode::Frobenius, config, n);
    let cs = mixed_column_sampling(oracle, k, eps, RowMode::Frobenius, config, seed)?;
    report.detail("score_accesses", (oracle.accesses() - before) as f64);
    report.size("score_sample", cs.score_sample);
    let s1 = cs.sample;
    let s2 = row_sample(&s1, Some(&cs.row_scores), k, eps, RowMode::Frobenius, config, seed)?;
    report.size("k1", k1);
    report.size("t1", s1.t);
    report.size("t2", s2.t);

    let a_tilde = oracle.sketch_cross(&s2, &s1);
    if s1.is_dense() && s2.is_dense() {
        report.flag("dense_fallback");
        return Ok((dense_exact(a_tilde, k)?, None));
    }
    let z = sketch_rank_span(&a_tilde, k1);

    let t3 = sample_size(config.c3 * (k as f64 * (k as f64 / eps).ln().max(1.0) / eps + k as f64 / (eps * eps)), s1.t);
    let s3 = sample_or_dense(&row_norm_scores(&z), t3, &mut seed.stream("alg1/S3"), Provenance::Leverage)?;
    let s13 = s1.compose(&s3);
    let as13 = oracle.sketch_columns(&s13);
    let v = orthonormal_basis(&as13);
    report.size("t3", s3.t);

    let t3f = s3.t as f64;
    // Never fewer rows than twice the dimension of the span being embedded.
    let t4 = sample_size((config.c4 * t3f * t3f.ln().max(1.0) / (eps * eps)).max(2.0 * t3f), n);
    let s4 = sample_or_dense(&row_norm_scores(&v), t4, &mut seed.stream("alg1/S4"), Provenance::Leverage)?;
    report.size("t4", s4.t);
    let p = s4.left_apply(&as13);
    let p_rank = numerical_rank(&svd(&p).s);
    if p_rank < v.ncols() {
        return Err(Error::Singular(format!("sampled Gram has rank {p_rank} < {}", v.ncols())));
    }
    let b = oracle.sketch_cross(&s4, &s1);
    let w = constrained_rank_k_regression(&p, &b, &z, k)?;

    let y = column_span(&w);
    if y.ncols() == 0 {
        report.flag("zero_sketch");
        return Ok((LowRankFactor::zero(n), None));
    }
    let q = qr_basis(&(&as13 * &y)).ok_or_else(|| Error::Singular("output basis is rank deficient".into()))?;
    let t5 = sample_size(config.c5 * (k as f64 * (k as f64).ln().max(1.0) + k as f64 / eps), n);
    let s5 = sample_or_dense(&row_norm_scores(&q), t5, &mut seed.stream("alg1/S5"), Provenance::Leverage)?;
    report.size("t5", s5.t);
    let n_mat = sampled_regression(&q, &s5, &oracle.sketch_rows(&s5))?;
    report.detail(
        "budget",
        report.details["score_accesses"]
            + (s1.t * s2.t + n * (s3.t + s5.t) + s1.t * s4.t) as f64,
    );
    let factor = LowRankFactor::new(q.clone(), n_mat)?;
    Ok((factor, Some(FrobeniusTrace { s1, z, q })))
}
