use crate::config::{check_eps, AlgoConfig};
use crate::error::{Error, Result};
use crate::linalg::{pinv, qr_basis};
use crate::lowrank::report::{RunClock, RunReport};
use crate::lowrank::steps::{sampled_regression, sketch_rank_span};
use crate::lowrank::{check_pipeline_rank, dense_exact, is_zero, with_retries, LowRankFactor};
use crate::oracle::PsdOracle;
use crate::pcp::{mixed_column_sampling, row_rank, row_sample, RowMode};
use crate::rng::Seed;
use crate::sampling::{row_norm_scores, sample_or_dense, sample_size, Provenance};

/// Rank-`k` approximation `Q·Nᵀ` with
/// `‖A − QNᵀ‖₂² ≤ (1+ε)‖A − A_k‖₂² + (ε/k)‖A − A_k‖_F²`.
pub fn algorithm2_spectral(
    oracle: &PsdOracle,
    k: usize,
    eps: f64,
    config: &AlgoConfig,
    seed: Seed,
) -> Result<(LowRankFactor, RunReport)> {
    config.validate()?;
    check_eps(eps)?;
    let n = oracle.n();
    check_pipeline_rank(k, n)?;
    let clock = RunClock::start(oracle);
    let mut report = RunReport::new("algorithm2_spectral", n, k, eps, seed, config);
    let (factor, retries) = with_retries(seed, |s| run_once(oracle, k, eps, config, s, &mut report))?;
    report.retries = retries;
    clock.finish(oracle, &mut report);
    Ok((factor, report))
}

fn run_once(
    oracle: &PsdOracle,
    k: usize,
    eps: f64,
    config: &AlgoConfig,
    seed: Seed,
    report: &mut RunReport,
) -> Result<LowRankFactor> {
    let n = oracle.n();
    let before = oracle.accesses();
    if is_zero(oracle) {
        report.flag("zero_matrix");
        return Ok(LowRankFactor::zero(n));
    }
    let k1 = row_rank(k, eps, RowMode::Spectral, config, n);
    let cs = mixed_column_sampling(oracle, k, eps, RowMode::Spectral, config, seed)?;
    report.detail("score_accesses", (oracle.accesses() - before) as f64);
    report.size("score_sample", cs.score_sample);
    let s1 = cs.sample;
    let s2 = row_sample(&s1, Some(&cs.row_scores), k, eps, RowMode::Spectral, config, seed)?;
    report.size("k1", k1);
    report.size("t1", s1.t);
    report.size("t2", s2.t);

    let a_tilde = oracle.sketch_cross(&s2, &s1);
    if s1.is_dense() && s2.is_dense() {
        report.flag("dense_fallback");
        return dense_exact(a_tilde, k);
    }
    let z = sketch_rank_span(&a_tilde, k);

    let kf = k as f64;
    let regression_size = kf * kf.ln().max(1.0) + kf * kf / eps;
    let t3 = sample_size(config.c3_spec * regression_size, s1.t);
    let s3 = sample_or_dense(&row_norm_scores(&z), t3, &mut seed.stream("alg2/S3"), Provenance::Leverage)?;
    report.size("t3", s3.t);
    let as13 = oracle.sketch_columns(&s1.compose(&s3));
    let zt_s3 = s3.left_apply(&z).transpose();
    let m = as13 * pinv(&zt_s3);
    let q = qr_basis(&m).ok_or_else(|| Error::Singular("sampled span is rank deficient".into()))?;

    let t4 = sample_size(config.c4_spec * regression_size, n);
    let s4 = sample_or_dense(&row_norm_scores(&q), t4, &mut seed.stream("alg2/S4"), Provenance::Leverage)?;
    report.size("t4", s4.t);
    let n_mat = sampled_regression(&q, &s4, &oracle.sketch_rows(&s4))?;
    LowRankFactor::new(q, n_mat)
}
