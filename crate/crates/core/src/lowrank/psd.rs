use nalgebra::DMatrix;

use crate::config::{check_eps, AlgoConfig};
use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, orthonormal_basis, pinv, svd, sym_eig_desc};
use crate::lowrank::report::{RunClock, RunReport};
use crate::lowrank::{algorithm2_spectral, check_pipeline_rank, is_zero, with_retries, LowRankFactor};
use crate::oracle::PsdOracle;
use crate::rng::Seed;
use crate::sampling::{row_norm_scores, sample_or_dense, sample_size, Provenance};

/// Symmetric PSD approximation `M·Mᵀ` of rank at most `k` with
/// `‖A − MMᵀ‖_F² ≤ (1+ε)‖A − A_k‖_F²`.
///
/// A spectral run at rank `m = ⌈c·k/ε⌉` supplies an orthonormal basis `Z`;
/// `A` is then compressed to `Zᵀ A Z` from a leverage sample of rows and the
/// compression is truncated to its top `k` positive eigenvalues.
pub fn psd_output(
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
    let mut report = RunReport::new("psd_output", n, k, eps, seed, config);

    if is_zero(oracle) {
        report.flag("zero_matrix");
        report.flag("no_positive_eigenvalues");
        clock.finish(oracle, &mut report);
        return Ok((LowRankFactor::zero(n), report));
    }
    let mut m = (config.c_psd * k as f64 / eps).ceil() as usize;
    let m_cap = (n - 1) / 4;
    if m > m_cap {
        m = m_cap;
        report.flag("basis_rank_clamped");
    }
    report.size("m", m);
    let (basis, inner) = algorithm2_spectral(oracle, m, config.inner_eps.min(1.0), config, seed.derive("basis"))?;
    for (name, v) in &inner.sample_sizes {
        report.size(&format!("basis_{name}"), *v as usize);
    }
    for flag in &inner.flags {
        report.flag(&format!("basis_{flag}"));
    }
    report.retries = inner.retries;
    let z = orthonormal_basis(&basis.left);

    let ((factor, kept), retries) = with_retries(seed, |s| compress(oracle, &z, k, eps, config, s, &mut report))?;
    report.retries += retries;
    report.detail("xtilde_rank", kept.len() as f64);
    report.detail("xtilde_min_eig", if kept.is_empty() { 0.0 } else { kept.iter().copied().fold(f64::INFINITY, f64::min) });
    if kept.is_empty() {
        report.flag("no_positive_eigenvalues");
    }
    clock.finish(oracle, &mut report);
    Ok((factor, report))
}

fn compress(
    oracle: &PsdOracle,
    z: &DMatrix<f64>,
    k: usize,
    eps: f64,
    config: &AlgoConfig,
    seed: Seed,
    report: &mut RunReport,
) -> Result<(LowRankFactor, Vec<f64>)> {
    let n = oracle.n();
    let m = z.ncols();
    if m == 0 {
        return Ok((LowRankFactor::zero(n), Vec::new()));
    }
    let mf = m as f64;
    let t1 = sample_size(config.c_psd * mf * mf.ln().max(1.0) / (eps * eps), n);
    let s1 = sample_or_dense(&row_norm_scores(z), t1, &mut seed.stream("psd/S1"), Provenance::Leverage)?;
    report.size("t1", s1.t);
    let sz = s1.left_apply(z);
    let rank = numerical_rank(&svd(&sz).s);
    if rank < m {
        return Err(Error::Singular(format!("sampled basis has rank {rank} < {m}")));
    }
    let b = pinv(&sz) * oracle.sketch_rows(&s1) * z;
    let sym = (&b + b.transpose()) * 0.5;
    let (values, vectors) = sym_eig_desc(&sym);
    let kept: Vec<f64> = values.iter().take(k).copied().filter(|&v| v > 0.0).collect();
    let mut left = z * vectors.columns(0, kept.len());
    for (j, &mu) in kept.iter().enumerate() {
        left.column_mut(j).scale_mut(mu.sqrt());
    }
    Ok((LowRankFactor::symmetric(left), kept))
}
