use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::PsdMatrix;
use crate::sampling::SampleSet;

/// Entry-level gateway to a PSD matrix that counts distinct symmetric pairs read.
///
/// The record of which pairs were read is a lock-free bitset over the upper
/// triangle, so concurrent readers agree on the count.
pub struct PsdOracle<'a> {
    matrix: &'a PsdMatrix,
    seen: Vec<AtomicU64>,
    count: AtomicU64,
}

#[inline]
fn pair_index(i: usize, j: usize) -> usize {
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

impl<'a> PsdOracle<'a> {
    pub fn new(matrix: &'a PsdMatrix) -> Self {
        let n = matrix.n();
        let pairs = n * (n + 1) / 2;
        let words = pairs.div_ceil(64);
        PsdOracle {
            matrix,
            seen: (0..words).map(|_| AtomicU64::new(0)).collect(),
            count: AtomicU64::new(0),
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn accesses(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn was_read(&self, i: usize, j: usize) -> bool {
        let p = pair_index(i, j);
        self.seen[p / 64].load(Ordering::Relaxed) & (1u64 << (p % 64)) != 0
    }

    pub fn entry(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.n();
        if i >= n || j >= n {
            return Err(Error::OutOfBounds { i, j, n });
        }
        Ok(self.read(i, j))
    }

    /// Unchecked-by-`Result` read for algorithm internals; panics out of range.
    #[inline]
    pub(crate) fn read(&self, i: usize, j: usize) -> f64 {
        let p = pair_index(i, j);
        let bit = 1u64 << (p % 64);
        let prev = self.seen[p / 64].fetch_or(bit, Ordering::Relaxed);
        if prev & bit == 0 {
            self.count.fetch_add(1, Ordering::Relaxed);
        }
        self.matrix.get(i, j)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.read(i, i)).collect()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n()).map(|j| self.read(i, j)).collect()
    }

    /// `A[rows, cols]` as a dense block.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| self.read(rows[r], cols[c]))
    }

    /// All rows of the listed columns, `A[:, cols]`.
    pub fn columns(&self, cols: &[usize]) -> DMatrix<f64> {
        let n = self.n();
        let mut out = DMatrix::zeros(n, cols.len());
        for (c, &j) in cols.iter().enumerate() {
            for i in 0..n {
                out[(i, c)] = self.read(i, j);
            }
        }
        out
    }

    /// `A·S` (`n × t`). Each distinct sampled column is read once.
    pub fn sketch_columns(&self, s: &SampleSet) -> DMatrix<f64> {
        let distinct = s.distinct();
        let block = self.columns(&distinct);
        let mut out = DMatrix::zeros(self.n(), s.t);
        for (j, (&i, &w)) in s.indices.iter().zip(&s.weights).enumerate() {
            let pos = distinct.binary_search(&i).expect("index is in the distinct set");
            out.column_mut(j).copy_from(&(block.column(pos) * w));
        }
        out
    }

    /// `Sᵀ·A` (`t × n`).
    pub fn sketch_rows(&self, s: &SampleSet) -> DMatrix<f64> {
        self.sketch_columns(s).transpose()
    }

    /// `S_rᵀ·A·S_c` (`t_r × t_c`).
    pub fn sketch_cross(&self, rows: &SampleSet, cols: &SampleSet) -> DMatrix<f64> {
        let dr = rows.distinct();
        let dc = cols.distinct();
        let block = self.submatrix(&dr, &dc);
        let col_pos: Vec<usize> = cols.indices.iter().map(|i| dc.binary_search(i).unwrap()).collect();
        let mut out = DMatrix::zeros(rows.t, cols.t);
        for (r, (&i, &wr)) in rows.indices.iter().zip(&rows.weights).enumerate() {
            let rp = dr.binary_search(&i).unwrap();
            for (c, &cp) in col_pos.iter().enumerate() {
                out[(r, c)] = block[(rp, cp)] * wr * cols.weights[c];
            }
        }
        out
    }

    /// Reads every entry; used only by dense fallbacks.
    pub fn read_all(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = self.read(i, j);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }
}
