//! Ground truth by full eigendecomposition. Slow by design.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{svd, sym_eig_desc, PINV_CUTOFF};
use crate::lowrank::LowRankFactor;
use crate::matrix::PsdMatrix;
use crate::scores::{RidgeScores, ScoreTarget};

#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralData {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ_{i>k} λ_i²`.
    pub fn frob_tail_sq(&self, k: usize) -> f64 {
        self.eigenvalues.iter().skip(k).map(|l| l * l).sum()
    }

    /// `λ_{k+1}²`.
    pub fn spec_tail_sq(&self, k: usize) -> f64 {
        self.eigenvalues.get(k).map_or(0.0, |l| l * l)
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.apply_function(|l| l)
    }

    /// `U f(Λ) Uᵀ`.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(f(l));
        }
        scaled * self.eigenvectors.transpose()
    }

    pub fn sqrt_matrix(&self) -> DMatrix<f64> {
        self.apply_function(|l| l.max(0.0).sqrt())
    }
}

pub fn eig_psd(a: &PsdMatrix) -> Result<SpectralData> {
    let (mut values, vectors) = sym_eig_desc(a.as_dmatrix());
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("eigendecomposition produced non-finite values"));
    }
    let tol = 1e-8 * values[0].abs();
    for v in values.iter_mut() {
        if *v < 0.0 && *v >= -tol {
            *v = 0.0;
        }
    }
    Ok(SpectralData { eigenvalues: values, eigenvectors: vectors })
}

pub fn matrix_sqrt(a: &PsdMatrix) -> Result<PsdMatrix> {
    let spec = eig_psd(a)?;
    let floor = -1e-6 * spec.eigenvalues[0].abs();
    let min = *spec.eigenvalues.last().unwrap();
    if min < floor {
        return Err(Error::NotPsd { min_eig: min, floor });
    }
    PsdMatrix::from_dmatrix(spec.sqrt_matrix())
}

/// Eckart–Young optimum: the factor of `A_k` plus both tails.
pub fn best_rank_k(a: &PsdMatrix, k: usize) -> Result<(LowRankFactor, f64, f64)> {
    let n = a.n();
    if k == 0 || k >= n {
        return Err(Error::validation(format!("rank k = {k} must satisfy 1 <= k < n = {n}")));
    }
    let spec = eig_psd(a)?;
    Ok((best_rank_k_from(&spec, k), spec.frob_tail_sq(k), spec.spec_tail_sq(k)))
}

pub fn best_rank_k_from(spec: &SpectralData, k: usize) -> LowRankFactor {
    let n = spec.n();
    let mut left = spec.eigenvectors.columns(0, k).into_owned();
    let mut right = left.clone();
    for j in 0..k {
        right.column_mut(j).scale_mut(spec.eigenvalues[j]);
    }
    if spec.eigenvalues[..k].iter().all(|&l| l >= 0.0) {
        for j in 0..k {
            left.column_mut(j).scale_mut(spec.eigenvalues[j].sqrt());
        }
        return LowRankFactor::symmetric(left);
    }
    debug_assert_eq!(left.nrows(), n);
    LowRankFactor::new(left, right).expect("factors share a shape")
}

/// Rank-`k` column ridge leverage scores from singular values and right singular vectors.
fn ridge_scores_from_svd(s: &[f64], v: &DMatrix<f64>, k: usize, target: ScoreTarget) -> RidgeScores {
    let tail: f64 = s.iter().skip(k).map(|x| x * x).sum();
    let top = s.first().copied().unwrap_or(0.0);
    let lambda = tail / k as f64;
    let count_tail = s.len().saturating_sub(k).max(1) as f64;
    let zero_ridge = tail <= (PINV_CUTOFF * top).powi(2) * count_tail;
    let d = v.nrows();
    let mut scores = vec![0.0; d];
    for (j, &sj) in s.iter().enumerate() {
        let w = if zero_ridge {
            if sj > PINV_CUTOFF * top { 1.0 } else { 0.0 }
        } else {
            sj * sj / (sj * sj + lambda)
        };
        if w == 0.0 {
            continue;
        }
        for (i, sc) in scores.iter_mut().enumerate() {
            *sc += w * v[(i, j)] * v[(i, j)];
        }
    }
    RidgeScores::new(scores, k, target)
}

/// `τ_i^k(A) = a_iᵀ (AAᵀ + (‖A − A_k‖_F²/k) I)⁺ a_i` for every column of a general matrix.
pub fn exact_ridge_scores(a: &DMatrix<f64>, k: usize) -> Result<RidgeScores> {
    let (n, d) = a.shape();
    if k == 0 || k > n.min(d) {
        return Err(Error::validation(format!("rank k = {k} outside 1..={}", n.min(d))));
    }
    let dec = svd(a);
    Ok(ridge_scores_from_svd(&dec.s, &dec.v, k, ScoreTarget::General))
}

/// Ridge scores of a PSD matrix or of its square root, from its spectrum.
pub fn exact_psd_ridge_scores(spec: &SpectralData, k: usize, target: ScoreTarget) -> Result<RidgeScores> {
    let n = spec.n();
    if k == 0 || k > n {
        return Err(Error::validation(format!("rank k = {k} outside 1..={n}")));
    }
    let s: Vec<f64> = match target {
        ScoreTarget::OfSqrtA => spec.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect(),
        _ => spec.eigenvalues.iter().map(|l| l.max(0.0)).collect(),
    };
    Ok(ridge_scores_from_svd(&s, &spec.eigenvectors, k, target))
}

/// `s_λ = Σ λ_i² / (λ_i² + λ)`.
pub fn exact_statistical_dimension(spec: &SpectralData, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::validation(format!("lambda must be nonnegative, got {lambda}")));
    }
    let top = spec.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    if lambda == 0.0 {
        if spec.eigenvalues.iter().any(|l| l.abs() <= PINV_CUTOFF * top) {
            return Err(Error::Singular("statistical dimension at lambda = 0 needs nonsingular A".into()));
        }
        return Ok(spec.n() as f64);
    }
    Ok(spec.eigenvalues.iter().map(|l| l * l / (l * l + lambda)).sum())
}

pub fn ridge_objective(a: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>, lambda: f64) -> f64 {
    (a * x - y).norm_squared() + lambda * x.norm_squared()
}

/// `x = (A² + λI)⁻¹ A y` and the attained objective.
pub fn exact_ridge_regression(
    a: &PsdMatrix,
    spec: &SpectralData,
    y: &DVector<f64>,
    lambda: f64,
) -> Result<(DVector<f64>, f64)> {
    if y.len() != a.n() {
        return Err(Error::validation(format!("y has length {}, expected {}", y.len(), a.n())));
    }
    if !(lambda >= 0.0) {
        return Err(Error::validation(format!("lambda must be nonnegative, got {lambda}")));
    }
    let top = spec.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let uty = spec.eigenvectors.tr_mul(y);
    let mut coef = DVector::zeros(uty.len());
    for (j, &l) in spec.eigenvalues.iter().enumerate() {
        let denom = l * l + lambda;
        if denom <= (PINV_CUTOFF * top).powi(2) {
            return Err(Error::Singular("A^2 + lambda I is singular".into()));
        }
        coef[j] = l / denom * uty[j];
    }
    let x = &spec.eigenvectors * coef;
    let obj = ridge_objective(a.as_dmatrix(), &x, y, lambda);
    Ok((x, obj))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> PsdMatrix {
        PsdMatrix::from_diagonal(d).unwrap()
    }

    #[test]
    fn eig_of_diagonal_and_all_ones() {
        let s = eig_psd(&diag(&[1.0, 3.0, 2.0])).unwrap();
        assert_eq!(s.eigenvalues, vec![3.0, 2.0, 1.0]);
        let j = PsdMatrix::from_row_major(3, vec![1.0; 9]).unwrap();
        let s = eig_psd(&j).unwrap();
        assert!((s.eigenvalues[0] - 3.0).abs() < 1e-12);
        assert!(s.eigenvalues[1].abs() < 1e-12 && s.eigenvalues[2].abs() < 1e-12);
    }

    #[test]
    fn sqrt_of_diagonal() {
        let r = matrix_sqrt(&diag(&[4.0, 9.0])).unwrap();
        assert!((r.as_dmatrix() - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))).norm() < 1e-12);
        let not_psd = diag(&[1.0, -0.5]);
        assert!(matches!(matrix_sqrt(&not_psd), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn tails_of_diagonal() {
        let (f, fro, spec) = best_rank_k(&diag(&[3.0, 2.0, 1.0]), 1).unwrap();
        assert!((fro - 5.0).abs() < 1e-12);
        assert!((spec - 4.0).abs() < 1e-12);
        assert!((f.to_dense() - DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 0.0, 0.0]))).norm() < 1e-12);
        assert!(best_rank_k(&diag(&[3.0, 2.0, 1.0]), 3).is_err());
    }

    #[test]
    fn ridge_scores_of_diag_4111() {
        // Ridge λ = 3: τ₁ = 16/(16+3), the rest 1/(1+3).
        let s = exact_ridge_scores(&DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0, 1.0, 1.0])), 1).unwrap();
        assert!((s.scores[0] - 16.0 / 19.0).abs() < 1e-12);
        for i in 1..4 {
            assert!((s.scores[i] - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn ridge_scores_of_all_ones_use_pseudoinverse() {
        let s = exact_ridge_scores(&DMatrix::from_element(4, 4, 1.0), 1).unwrap();
        for v in &s.scores {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn ridge_scores_of_identity() {
        let s = exact_ridge_scores(&DMatrix::identity(10, 10), 3).unwrap();
        for v in &s.scores {
            assert!((v - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn statistical_dimension_values() {
        let s = eig_psd(&diag(&[2.0, 1.0])).unwrap();
        assert!((exact_statistical_dimension(&s, 1.0).unwrap() - 1.3).abs() < 1e-12);
        let i4 = eig_psd(&PsdMatrix::identity(4)).unwrap();
        assert!((exact_statistical_dimension(&i4, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(exact_statistical_dimension(&i4, 0.0).unwrap(), 4.0);
        let sing = eig_psd(&diag(&[1.0, 0.0])).unwrap();
        assert!(exact_statistical_dimension(&sing, 0.0).is_err());
    }

    #[test]
    fn ridge_regression_two_by_two() {
        let a = diag(&[2.0, 1.0]);
        let s = eig_psd(&a).unwrap();
        let y = DVector::from_vec(vec![3.0, 2.0]);
        let (x, _) = exact_ridge_regression(&a, &s, &y, 1.0).unwrap();
        assert!((x[0] - 1.2).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        let (x0, obj0) = exact_ridge_regression(&a, &s, &DVector::zeros(2), 1.0).unwrap();
        assert_eq!(x0.norm(), 0.0);
        assert_eq!(obj0, 0.0);
    }
}
