use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::spectral_norm_sq;

/// `B = L·Rᵀ`, or `B = M·Mᵀ` when `symmetric_psd` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor {
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
    pub symmetric_psd: bool,
}

impl LowRankFactor {
    pub fn new(left: DMatrix<f64>, right: DMatrix<f64>) -> Result<Self> {
        if left.shape() != right.shape() {
            return Err(Error::validation(format!(
                "factor shapes differ: {:?} vs {:?}",
                left.shape(),
                right.shape()
            )));
        }
        Ok(LowRankFactor { left, right, symmetric_psd: false })
    }

    pub fn symmetric(m: DMatrix<f64>) -> Self {
        LowRankFactor { right: m.clone(), left: m, symmetric_psd: true }
    }

    pub fn zero(n: usize) -> Self {
        Self::symmetric(DMatrix::zeros(n, 0))
    }

    pub fn n(&self) -> usize {
        self.left.nrows()
    }

    /// Width of the factors, an upper bound on the rank.
    pub fn width(&self) -> usize {
        self.left.ncols()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.left * self.right.transpose()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.left * self.right.tr_mul(x)
    }

    pub fn apply_t(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.right * self.left.tr_mul(x)
    }

    pub fn frob_err_sq(&self, a: &DMatrix<f64>) -> f64 {
        (a - self.to_dense()).norm_squared()
    }

    /// `‖A − B‖₂²` by Lanczos on `(A − B)ᵀ(A − B)` without forming the residual.
    pub fn spec_err_sq(&self, a: &DMatrix<f64>) -> f64 {
        let n = a.ncols();
        if n <= 200 {
            return crate::linalg::dense_spectral_norm_sq(&(a - self.to_dense()));
        }
        spectral_norm_sq(n, |x| a * x - self.apply(x), |y| a.tr_mul(y) - self.apply_t(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_factor_reconstructs() {
        let m = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 0.0]);
        let f = LowRankFactor::symmetric(m);
        let d = f.to_dense();
        assert_eq!(d[(1, 1)], 4.0);
        assert_eq!(d[(0, 1)], 2.0);
        assert_eq!(f.frob_err_sq(&d), 0.0);
        assert!(f.spec_err_sq(&d) < 1e-24);
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(LowRankFactor::new(DMatrix::zeros(3, 2), DMatrix::zeros(3, 1)).is_err());
    }
}
