//! Weighted sampling matrices.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, svd, sym_eig_desc};
use crate::rng::Seed;

/// Which scores a sample was drawn from. Downstream constructions check this
/// before relying on a guarantee that needs a particular score family.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    /// Every index exactly once with weight 1.
    Dense,
    /// Scores supplied by the caller.
    Custom,
    /// Sum of square-root ridge score families at the listed ranks.
    RidgeScores { ranks: Vec<usize> },
    /// Squared row norms of an orthonormal basis.
    Leverage,
}

/// A sampling matrix `S` (`n × t`): column `j` is `weights[j]·e_{indices[j]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub t: usize,
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub provenance: Provenance,
}

impl SampleSet {
    pub fn dense(n: usize) -> Self {
        SampleSet {
            t: n,
            indices: (0..n).collect(),
            weights: vec![1.0; n],
            probabilities: vec![1.0 / n as f64; n],
            provenance: Provenance::Dense,
        }
    }

    pub fn n(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_dense(&self) -> bool {
        self.provenance == Provenance::Dense
    }

    /// Sorted distinct indices.
    pub fn distinct(&self) -> Vec<usize> {
        let mut d = self.indices.clone();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// `M·S` for a matrix whose columns are indexed like this sample.
    pub fn right_apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), self.t);
        for (j, (&i, &w)) in self.indices.iter().zip(&self.weights).enumerate() {
            out.column_mut(j).copy_from(&(m.column(i) * w));
        }
        out
    }

    /// `Sᵀ·M` for a matrix whose rows are indexed like this sample.
    pub fn left_apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.t, m.ncols());
        for (j, (&i, &w)) in self.indices.iter().zip(&self.weights).enumerate() {
            out.row_mut(j).copy_from(&(m.row(i) * w));
        }
        out
    }

    /// The product `S·inner`, where `inner` samples among this sample's `t` columns.
    pub fn compose(&self, inner: &SampleSet) -> SampleSet {
        assert_eq!(inner.n(), self.t, "inner sample must range over this sample's columns");
        SampleSet {
            t: inner.t,
            indices: inner.indices.iter().map(|&j| self.indices[j]).collect(),
            weights: inner.indices.iter().zip(&inner.weights).map(|(&j, &w)| self.weights[j] * w).collect(),
            probabilities: self.probabilities.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn provenance_has_rank(&self, rank: usize) -> bool {
        match &self.provenance {
            Provenance::Dense => true,
            Provenance::RidgeScores { ranks } => ranks.iter().any(|&r| r >= rank),
            _ => false,
        }
    }
}

/// Binary-search inverse CDF draw.
fn draw_index(cdf: &[f64], u: f64) -> usize {
    let target = u * cdf[cdf.len() - 1];
    let pos = cdf.partition_point(|&c| c <= target);
    pos.min(cdf.len() - 1)
}

pub(crate) fn sample_with<R: Rng>(
    scores: &[f64],
    t: usize,
    rng: &mut R,
    provenance: Provenance,
) -> Result<SampleSet> {
    if scores.is_empty() {
        return Err(Error::validation("cannot sample from an empty score vector"));
    }
    if t == 0 {
        return Err(Error::validation("sample count must be at least 1"));
    }
    if let Some((i, s)) = scores.iter().enumerate().find(|(_, s)| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::validation(format!("score {i} is {s}; scores must be finite and positive")));
    }
    let total: f64 = scores.iter().sum();
    let probabilities: Vec<f64> = scores.iter().map(|s| s / total).collect();
    let mut cdf = Vec::with_capacity(scores.len());
    let mut acc = 0.0;
    for p in &probabilities {
        acc += p;
        cdf.push(acc);
    }
    let mut indices = Vec::with_capacity(t);
    let mut weights = Vec::with_capacity(t);
    for _ in 0..t {
        let i = draw_index(&cdf, rng.random::<f64>());
        indices.push(i);
        weights.push(1.0 / (t as f64 * probabilities[i]).sqrt());
    }
    Ok(SampleSet { t, indices, weights, probabilities, provenance })
}

/// `t` i.i.d. draws with replacement from `p_i ∝ scores_i`, weights `1/√(t p_i)`.
pub fn scores_to_sampleset(scores: &[f64], t: usize, seed: Seed) -> Result<SampleSet> {
    sample_with(scores, t, &mut seed.stream("sample"), Provenance::Custom)
}

/// Draws `t` samples, or the dense identity sample when `t ≥ n`.
pub(crate) fn sample_or_dense<R: Rng>(
    scores: &[f64],
    t: usize,
    rng: &mut R,
    provenance: Provenance,
) -> Result<SampleSet> {
    if t >= scores.len() {
        Ok(SampleSet::dense(scores.len()))
    } else {
        sample_with(scores, t, rng, provenance)
    }
}

/// Sample size from a real-valued formula: at least 1, saturating at `n`.
pub(crate) fn sample_size(raw: f64, n: usize) -> usize {
    if !raw.is_finite() || raw >= n as f64 {
        n
    } else {
        (raw.ceil() as usize).max(1)
    }
}

/// Squared row norms of a matrix, floored so that every row stays drawable.
pub(crate) fn row_norm_scores(m: &DMatrix<f64>) -> Vec<f64> {
    let raw: Vec<f64> = m.row_iter().map(|r| r.norm_squared()).collect();
    let total: f64 = raw.iter().sum();
    let floor = (total / raw.len() as f64 * 1e-12).max(f64::MIN_POSITIVE);
    raw.into_iter().map(|v| v.max(floor)).collect()
}

/// Whether `C = A·S` is a `(1 ± ε)` subspace embedding of the columns of `A`:
/// all eigenvalues of `VᵀSSᵀV` (with `A = UΣVᵀ`) lie in `[1 − ε, 1 + ε]`.
pub fn subspace_embedding_check(a_cols: &DMatrix<f64>, sample: &SampleSet, eps: f64) -> Result<bool> {
    if sample.n() != a_cols.ncols() {
        return Err(Error::validation(format!(
            "sample is over {} indices but the matrix has {} columns",
            sample.n(),
            a_cols.ncols()
        )));
    }
    let d = svd(a_cols);
    let r = numerical_rank(&d.s);
    if r == 0 {
        return Ok(true);
    }
    let v = d.v.columns(0, r).into_owned();
    let sv = sample.left_apply(&v);
    let (vals, _) = sym_eig_desc(&sv.tr_mul(&sv));
    Ok(vals.iter().all(|&m| m >= 1.0 - eps && m <= 1.0 + eps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_weights() {
        let s = scores_to_sampleset(&[1.0; 4], 2, Seed(9)).unwrap();
        for w in &s.weights {
            assert!((w - 2f64.sqrt()).abs() < 1e-15);
        }
        assert!((s.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalisation() {
        let s = scores_to_sampleset(&[3.0, 1.0], 1, Seed(1)).unwrap();
        assert_eq!(s.probabilities, vec![0.75, 0.25]);
    }

    #[test]
    fn rejects_nonpositive_scores() {
        assert!(scores_to_sampleset(&[1.0, 0.0], 3, Seed(1)).is_err());
        assert!(scores_to_sampleset(&[1.0, -2.0], 3, Seed(1)).is_err());
        assert!(scores_to_sampleset(&[1.0], 0, Seed(1)).is_err());
    }

    #[test]
    fn inverse_cdf_edges() {
        let cdf = [0.25, 0.5, 1.0];
        assert_eq!(draw_index(&cdf, 0.0), 0);
        assert_eq!(draw_index(&cdf, 0.25), 1);
        assert_eq!(draw_index(&cdf, 0.999), 2);
    }

    #[test]
    fn dense_sample_is_an_embedding() {
        let a = DMatrix::from_fn(5, 7, |i, j| ((i * 7 + j) as f64).sin());
        assert!(subspace_embedding_check(&a, &SampleSet::dense(7), 1e-9).unwrap());
        assert!(subspace_embedding_check(&a, &SampleSet::dense(6), 0.5).is_err());
    }
}
