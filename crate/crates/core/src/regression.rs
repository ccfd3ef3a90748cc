//! Ridge regression `min ‖Ax − y‖² + λ‖x‖²` through a spectral low-rank approximation.

use nalgebra::{DMatrix, DVector};

use crate::config::{check_eps, AlgoConfig};
use crate::error::{Error, Result};
use crate::exact::{eig_psd, exact_ridge_regression, ridge_objective, SpectralData};
use crate::linalg::svd;
use crate::lowrank::{algorithm2_spectral, LowRankFactor, RunReport};
use crate::matrix::PsdMatrix;
use crate::oracle::PsdOracle;
use crate::pcp::column_pcp;
use crate::rng::Seed;

pub struct RidgeProblem<'o, 'a> {
    pub oracle: &'o PsdOracle<'a>,
    pub y: DVector<f64>,
    pub lambda: f64,
    /// Upper bound `s̃_λ` on the statistical dimension, if known.
    pub s_lambda_hint: Option<f64>,
}

impl<'o, 'a> RidgeProblem<'o, 'a> {
    pub fn new(oracle: &'o PsdOracle<'a>, y: DVector<f64>, lambda: f64, s_lambda_hint: Option<f64>) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::validation(format!("lambda must be positive, got {lambda}")));
        }
        if y.len() != oracle.n() {
            return Err(Error::validation(format!("y has length {}, expected {}", y.len(), oracle.n())));
        }
        if let Some(h) = s_lambda_hint {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::validation(format!("statistical dimension hint must be positive, got {h}")));
            }
        }
        Ok(RidgeProblem { oracle, y, lambda, s_lambda_hint })
    }
}

/// Approximate ridge solution from a rank-`⌈c·s̃_λ/ε²⌉` spectral approximation
/// of `A`, solved exactly through the factor.
pub fn sublinear_ridge(
    problem: &RidgeProblem,
    eps: f64,
    config: &AlgoConfig,
    seed: Seed,
) -> Result<(DVector<f64>, RunReport)> {
    config.validate()?;
    check_eps(eps)?;
    let oracle = problem.oracle;
    let n = oracle.n();
    let start = std::time::Instant::now();
    let acc0 = oracle.accesses();
    let hint = match problem.s_lambda_hint {
        Some(h) => h,
        None => estimate_statistical_dimension(oracle, problem.lambda, config, seed.derive("stat_dim"))?.value,
    };
    let k = ((config.c_ridge * hint / (eps * eps)).ceil() as usize).max(1);
    let mut report = RunReport::new("sublinear_ridge", n, k, eps, seed, config);
    report.detail("lambda", problem.lambda);
    report.detail("s_lambda_hint", hint);
    if problem.s_lambda_hint.is_none() {
        report.flag("s_lambda_estimated");
    }

    let x = if 4 * k >= n {
        report.flag("dense_fallback");
        let a = PsdMatrix::from_dmatrix(oracle.read_all())?;
        exact_ridge_regression(&a, &eig_psd(&a)?, &problem.y, problem.lambda)?.0
    } else {
        let inner_eps = config.inner_eps;
        let (factor, inner) = algorithm2_spectral(oracle, k, inner_eps, config, seed.derive("spectral"))?;
        for (name, v) in &inner.sample_sizes {
            report.size(name, *v as usize);
        }
        for flag in &inner.flags {
            report.flag(flag);
        }
        report.retries = inner.retries;
        report.detail("inner_eps", inner_eps);
        ridge_via_factor(&factor, &problem.y, problem.lambda)?
    };
    report.accesses = oracle.accesses() - acc0;
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((x, report))
}

/// Fills the objective fields of a ridge report; `ratio` is attained over optimal.
pub fn evaluate_ridge(
    report: &mut RunReport,
    a: &PsdMatrix,
    spectrum: &SpectralData,
    y: &DVector<f64>,
    lambda: f64,
    x: &DVector<f64>,
) -> Result<()> {
    let (_, optimum) = exact_ridge_regression(a, spectrum, y, lambda)?;
    let attained = ridge_objective(a.as_dmatrix(), x, y, lambda);
    report.detail("objective", attained);
    report.detail("optimum", optimum);
    report.detail("s_lambda", crate::exact::exact_statistical_dimension(spectrum, lambda)?);
    report.ratio = Some(attained / optimum);
    Ok(())
}

/// Exact minimiser of `‖Bx − y‖² + λ‖x‖²` for `B = L·Rᵀ`:
/// `x = V·Σ(Σ² + λ)⁻¹·Uᵀy` with `B = UΣVᵀ` built from thin QRs of the factors.
pub fn ridge_via_factor(factor: &LowRankFactor, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::validation(format!("lambda must be positive, got {lambda}")));
    }
    let n = factor.n();
    if y.len() != n {
        return Err(Error::validation(format!("y has length {}, expected {n}", y.len())));
    }
    if factor.width() == 0 {
        return Ok(DVector::zeros(n));
    }
    let left_qr = factor.left.clone().qr();
    let (ql, rl) = (left_qr.q(), left_qr.r());
    let (qr_, rr) = if factor.symmetric_psd {
        (ql.clone(), rl.clone())
    } else {
        let right_qr = factor.right.clone().qr();
        (right_qr.q(), right_qr.r())
    };
    let core: DMatrix<f64> = rl * rr.transpose();
    let d = svd(&core);
    let u = ql * d.u;
    let v = qr_ * d.v;
    let mut coef = u.tr_mul(y);
    for (j, c) in coef.iter_mut().enumerate() {
        let s = d.s[j];
        *c *= s / (s * s + lambda);
    }
    Ok(v * coef)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatDimEstimate {
    /// The hint `s̃_λ`.
    pub value: f64,
    /// Smallest accepted rank, or `n` when the search ran out.
    pub k: usize,
    pub exhausted: bool,
    pub accesses: u64,
}

/// Constant-factor estimate of `s_λ` by a doubling search over `k`.
///
/// For each candidate `k` a column sketch `C = A·S` is formed; `k` is accepted
/// once `σ_{k+1}(C)² ≤ λ/8`, i.e. the sketch sees no more than `k` directions
/// with `λ_i² ≥ λ/8`. The hint is then `Σ_{j≤k} σ_j²/(σ_j² + λ) + tail/λ` where
/// `tail = ‖C‖_F² − Σ_{j≤k} σ_j²` stands in for `‖A − A_k‖_F²`. Reads as much
/// as the column sketches do; no sublinearity beyond that is claimed.
pub fn estimate_statistical_dimension(
    oracle: &PsdOracle,
    lambda: f64,
    config: &AlgoConfig,
    seed: Seed,
) -> Result<StatDimEstimate> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::validation(format!("lambda must be positive, got {lambda}")));
    }
    let n = oracle.n();
    let acc0 = oracle.accesses();
    let mut k = 1;
    while 2 * k < n {
        let sketch = column_pcp(oracle, k, 0.5, config, seed.derive_indexed("k", k as u64))?;
        let s = svd(&sketch.sketch).s;
        let next = s.get(k).copied().unwrap_or(0.0);
        if next * next <= lambda / 8.0 {
            let head: f64 = s.iter().take(k).map(|v| v * v / (v * v + lambda)).sum();
            let captured: f64 = s.iter().take(k).map(|v| v * v).sum();
            let tail = (sketch.sketch.norm_squared() - captured).max(0.0);
            return Ok(StatDimEstimate {
                value: (head + tail / lambda).min(n as f64),
                k,
                exhausted: false,
                accesses: oracle.accesses() - acc0,
            });
        }
        k *= 2;
    }
    Ok(StatDimEstimate { value: n as f64, k: n, exhausted: true, accesses: oracle.accesses() - acc0 })
}
