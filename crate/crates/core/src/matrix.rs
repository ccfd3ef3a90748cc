use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense symmetric matrix. Storage is canonicalised from the lower triangle so
/// that `A[i][j]` and `A[j][i]` are bit-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix {
    data: DMatrix<f64>,
}

impl PsdMatrix {
    pub fn from_dmatrix(mut m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::validation(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("matrix has non-finite entries"));
        }
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                m[(j, i)] = m[(i, j)];
            }
        }
        Ok(PsdMatrix { data: m })
    }

    pub fn from_row_major(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::validation(format!(
                "expected {} values for n = {n}, got {}",
                n * n,
                values.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(n, n, &values))
    }

    pub fn identity(n: usize) -> Self {
        PsdMatrix { data: DMatrix::identity(n, n) }
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::from_dmatrix(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Direct read that bypasses access accounting. Algorithms go through
    /// [`crate::oracle::PsdOracle`] instead.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn row_major(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.data[(i, j)]);
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.norm_squared()
    }

    /// Largest `|A[i][j]| - max(A[i][i], A[j][j])` over all pairs; nonpositive for PSD input.
    pub fn domination_excess(&self) -> f64 {
        let n = self.n();
        let mut worst = f64::NEG_INFINITY;
        for j in 0..n {
            for i in j..n {
                let d = self.data[(i, i)].max(self.data[(j, j)]);
                worst = worst.max(self.data[(i, j)].abs() - d);
            }
        }
        worst
    }
}
