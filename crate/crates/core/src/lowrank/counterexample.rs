use serde::Serialize;

use crate::error::Result;
use crate::exact::eig_psd;
use crate::generate::gen_counterexample;
use crate::linalg::orthonormal_basis;

/// Costs of the pair `(A, B)` where `B` is a good approximation of `A^{1/2}`
/// whose row space is a poor subspace for `A`.
#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `‖A^{1/2} − B‖_F²`.
    pub sqrt_err_sq: f64,
    /// `‖A^{1/2} − (A^{1/2})_k‖_F²`.
    pub sqrt_opt_sq: f64,
    /// `(1+ε)(n−k−1)β²`, the intended value of `sqrt_err_sq`.
    pub sqrt_err_expected: f64,
    /// `‖A − C‖_F²` for the best `C` with rows in the row space of `B`.
    pub projection_cost: f64,
    /// `‖A − A_k‖_F²`.
    pub opt_tail: f64,
    /// `projection_cost / opt_tail`.
    pub ratio: f64,
    /// `projection_cost` evaluated in closed form for this construction.
    pub closed_form_cost: f64,
    /// `1 + ε(n−k−1)α²/β²`.
    pub claimed_lower_bound: f64,
    pub claimed_bound_holds: bool,
}

pub fn counterexample_demo(n: usize, k: usize, eps: f64, alpha: f64, beta: f64) -> Result<CounterexampleReport> {
    let ce = gen_counterexample(n, k, alpha, beta, eps)?;
    let a = ce.a.as_dmatrix();
    let spectrum = eig_psd(&ce.a)?;
    let root = spectrum.sqrt_matrix();
    let sqrt_err_sq = (&root - &ce.b).norm_squared();
    let sqrt_opt_sq: f64 = spectrum.eigenvalues.iter().skip(k).map(|&l| l.max(0.0)).sum();

    let v = orthonormal_basis(&ce.b.transpose());
    let c = a * &v * v.transpose();
    let projection_cost = (a - c).norm_squared();
    let opt_tail = spectrum.frob_tail_sq(k);

    let m = (n - k - 1) as f64;
    let (a2, b2) = (alpha * alpha, beta * beta);
    let c2 = eps * m * b2;
    let closed_form_cost = (a2 * a2 * c2 + b2 * b2 * a2) / (a2 + c2) + (m - 1.0) * b2 * b2;
    let ratio = projection_cost / opt_tail;
    let claimed_lower_bound = 1.0 + eps * m * a2 / b2;
    Ok(CounterexampleReport {
        n,
        k,
        eps,
        alpha,
        beta,
        sqrt_err_sq,
        sqrt_opt_sq,
        sqrt_err_expected: (1.0 + eps) * m * b2,
        projection_cost,
        opt_tail,
        ratio,
        closed_form_cost,
        claimed_lower_bound,
        claimed_bound_holds: ratio >= claimed_lower_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_error_is_one_plus_eps_times_optimum() {
        let r = counterexample_demo(32, 1, 0.5, 10.0, 1.0).unwrap();
        assert!((r.sqrt_err_sq - r.sqrt_err_expected).abs() < 1e-9);
        assert!((r.sqrt_err_sq / r.sqrt_opt_sq - 1.5).abs() < 1e-12);
    }

    #[test]
    fn projection_cost_matches_closed_form() {
        for (n, k, alpha) in [(32, 1, 10.0), (20, 3, 4.0), (12, 2, 1.5)] {
            let r = counterexample_demo(n, k, 0.5, alpha, 1.0).unwrap();
            assert!((r.projection_cost - r.closed_form_cost).abs() < 1e-8 * r.closed_form_cost);
        }
    }

    #[test]
    fn ratio_exceeds_one_plus_eps() {
        let r = counterexample_demo(32, 1, 0.5, 10.0, 1.0).unwrap();
        assert!(r.ratio > 1.5);
    }
}
