use nalgebra::DMatrix;

use crate::config::{check_eps, AlgoConfig};
use crate::error::Result;
use crate::linalg::{svd, sym_eig_desc, PINV_CUTOFF};
use crate::lowrank::report::{RunClock, RunReport};
use crate::lowrank::{check_pipeline_rank, is_zero, LowRankFactor};
use crate::oracle::PsdOracle;
use crate::rng::Seed;
use crate::sampling::{sample_or_dense, sample_size, Provenance};
use crate::scores::approx_sqrt_ridge_scores;

/// Nyström approximation `(A·S·(SᵀAS)⁺·SᵀA)_k` from columns sampled by
/// square-root ridge scores at accuracy `ε' = ε/(3√n)`, with default constants.
pub fn sqrt_route_baseline(oracle: &PsdOracle, k: usize, eps: f64, seed: Seed) -> Result<(LowRankFactor, RunReport)> {
    sqrt_route_baseline_with(oracle, k, eps, &AlgoConfig::default(), seed)
}

pub fn sqrt_route_baseline_with(
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
    let mut report = RunReport::new("sqrt_route_baseline", n, k, eps, seed, config);
    if is_zero(oracle) {
        report.flag("zero_matrix");
        clock.finish(oracle, &mut report);
        return Ok((LowRankFactor::zero(n), report));
    }

    let tau = approx_sqrt_ridge_scores(oracle, k, config, seed.derive("scores"))?;
    let eps_inner = eps / (3.0 * (n as f64).sqrt());
    report.detail("eps_inner", eps_inner);
    let raw = config.c_baseline * config.log_factor(k as f64 / config.failure_delta) * tau.sum / eps_inner;
    let s = sample_or_dense(&tau.scores, sample_size(raw, n), &mut seed.stream("baseline/S"), Provenance::RidgeScores {
        ranks: vec![k],
    })?;
    if s.is_dense() {
        report.flag("dense_fallback");
    }
    let cols = s.distinct();
    report.size("t", s.t);
    report.size("distinct", cols.len());

    let c = oracle.columns(&cols);
    let w = DMatrix::from_fn(cols.len(), cols.len(), |a, b| c[(cols[a], b)]);
    let (theta, u) = sym_eig_desc(&w);
    let cutoff = PINV_CUTOFF * theta[0].max(0.0);
    let mut half = u.clone();
    for (j, &t) in theta.iter().enumerate() {
        half.column_mut(j).scale_mut(if t > cutoff { 1.0 / t.sqrt() } else { 0.0 });
    }
    let f = c * half * u.transpose();
    let d = svd(&f);
    let r = k.min(d.s.len());
    let mut left = d.u.columns(0, r).into_owned();
    for j in 0..r {
        left.column_mut(j).scale_mut(d.s[j]);
    }
    clock.finish(oracle, &mut report);
    Ok((LowRankFactor::symmetric(left), report))
}
