//! End-to-end approximation pipelines.

mod baseline;
mod counterexample;
mod factor;
mod frobenius;
mod psd;
mod report;
mod spectral;
pub mod steps;

pub use baseline::{sqrt_route_baseline, sqrt_route_baseline_with};
pub use counterexample::{counterexample_demo, CounterexampleReport};
pub use factor::LowRankFactor;
pub use frobenius::{algorithm1_frobenius, algorithm1_frobenius_traced, FrobeniusTrace};
pub use psd::psd_output;
pub use report::{format_f64, spectral_reference, value_to_json, RunReport};
pub use spectral::algorithm2_spectral;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::exact::{best_rank_k_from, eig_psd};
use crate::matrix::PsdMatrix;
use crate::oracle::PsdOracle;
use crate::rng::Seed;

/// Fresh-stream reruns allowed after a degenerate sample.
pub const MAX_RETRIES: usize = 3;

pub(crate) fn check_pipeline_rank(k: usize, n: usize) -> Result<()> {
    if k == 0 || 4 * k >= n {
        return Err(Error::validation(format!("rank k = {k} must satisfy 1 <= k < n/4 for n = {n}")));
    }
    Ok(())
}

/// Runs `attempt` on the given seed and, while it reports a singular sample,
/// on up to [`MAX_RETRIES`] derived seeds.
pub(crate) fn with_retries<T>(seed: Seed, mut attempt: impl FnMut(Seed) -> Result<T>) -> Result<(T, u32)> {
    let mut reason = String::new();
    for round in 0..=MAX_RETRIES {
        let s = if round == 0 { seed } else { seed.derive_indexed("retry", round as u64) };
        match attempt(s) {
            Ok(v) => return Ok((v, round as u32)),
            Err(Error::Singular(why)) => reason = why,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Numerical { retries: MAX_RETRIES, reason })
}

/// A PSD matrix with a zero diagonal is zero.
pub(crate) fn is_zero(oracle: &PsdOracle) -> bool {
    oracle.diagonal().iter().all(|&d| d == 0.0)
}

/// Best rank-`k` approximation of a fully read matrix.
pub(crate) fn dense_exact(a: DMatrix<f64>, k: usize) -> Result<LowRankFactor> {
    let spectrum = eig_psd(&PsdMatrix::from_dmatrix(a)?)?;
    Ok(best_rank_k_from(&spectrum, k))
}
