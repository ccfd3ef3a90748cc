//! Building blocks shared by the pipelines.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, orthonormal_basis, pinv, svd, top_right_singular_vectors, truncate_rank};
use crate::sampling::SampleSet;

/// Top-`k₁` right singular vectors of a small sketch, as orthonormal columns.
/// Directions beyond the sketch's numerical rank are dropped.
pub fn sketch_rank_span(a_tilde: &DMatrix<f64>, k1: usize) -> DMatrix<f64> {
    let rank = numerical_rank(&svd(a_tilde).s);
    top_right_singular_vectors(a_tilde, k1.min(rank))
}

/// `W = P⁺·[Π_P·B·Z]_k`, the minimiser of `‖P·W·Zᵀ − B‖_F` over `W` of rank at most `k`.
///
/// `Π_P` is the projection onto the column space of `P`. Projecting before
/// truncating matters when `P` is not orthonormal.
pub fn constrained_rank_k_regression(
    p: &DMatrix<f64>,
    b: &DMatrix<f64>,
    z: &DMatrix<f64>,
    k: usize,
) -> Result<DMatrix<f64>> {
    if p.nrows() != b.nrows() || b.ncols() != z.nrows() {
        return Err(Error::validation(format!(
            "shapes do not chain: P {}x{}, B {}x{}, Z {}x{}",
            p.nrows(),
            p.ncols(),
            b.nrows(),
            b.ncols(),
            z.nrows(),
            z.ncols()
        )));
    }
    let basis = orthonormal_basis(p);
    let bz = b * z;
    let projected = &basis * (basis.transpose() * bz);
    Ok(pinv(p) * truncate_rank(&projected, k))
}

/// `N = ((SᵀQ)⁺·SᵀA)ᵀ` from the sampled rows `sa = SᵀA`.
pub fn sampled_regression(q: &DMatrix<f64>, s: &SampleSet, sa: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if s.n() != q.nrows() || sa.nrows() != s.t {
        return Err(Error::validation("sampled right-hand side does not match the sample"));
    }
    let sq = s.left_apply(q);
    let rank = numerical_rank(&svd(&sq).s);
    if rank < q.ncols() {
        return Err(Error::Singular(format!("sampled basis has rank {rank} < {}", q.ncols())));
    }
    Ok((pinv(&sq) * sa).transpose())
}

/// Orthonormal basis of the column space of `W`, truncated to its numerical rank.
pub(crate) fn column_span(w: &DMatrix<f64>) -> DMatrix<f64> {
    let d = svd(w);
    let r = numerical_rank(&d.s);
    d.u.columns(0, r).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, random_orthonormal};
    use crate::sampling::scores_to_sampleset;
    use crate::Seed;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(s: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(s)
    }

    #[test]
    fn span_of_diagonal_sketch_is_coordinates() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 5.0, 3.0, 0.5]));
        let z = sketch_rank_span(&a, 2);
        assert!((z[(1, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((z[(2, 1)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn span_residual_is_next_singular_value() {
        let a = gaussian_matrix(80, 120, &mut rng(1));
        let z = sketch_rank_span(&a, 10);
        let resid = &a - &a * &z * z.transpose();
        let s = svd(&a).s;
        let top = svd(&resid).s[0];
        assert!((top - s[10]).abs() < 1e-8);
    }

    #[test]
    fn span_beyond_rank_is_exact() {
        let g = gaussian_matrix(30, 4, &mut rng(2));
        let a = &g * g.transpose();
        let z = sketch_rank_span(&a, 6);
        assert_eq!(z.ncols(), 4);
        assert!((&a - &a * &z * z.transpose()).norm() < 1e-9);
    }

    #[test]
    fn regression_recovers_planted_w() {
        let mut r = rng(3);
        let p = gaussian_matrix(20, 6, &mut r);
        let z = random_orthonormal(15, 5, &mut r);
        let w0 = gaussian_matrix(6, 2, &mut r) * gaussian_matrix(2, 5, &mut r);
        let b = &p * &w0 * z.transpose();
        let w = constrained_rank_k_regression(&p, &b, &z, 2).unwrap();
        assert!((&p * &w * z.transpose() - &b).norm() < 1e-9);
        assert!(numerical_rank(&svd(&w).s) <= 2);
    }

    #[test]
    fn identity_p_matches_eckart_young() {
        let mut r = rng(4);
        let b = gaussian_matrix(12, 9, &mut r);
        let z = random_orthonormal(9, 5, &mut r);
        let w = constrained_rank_k_regression(&DMatrix::identity(12, 12), &b, &z, 2).unwrap();
        let expect = truncate_rank(&(&b * &z), 2);
        assert!((w - expect).norm() < 1e-9);
    }

    #[test]
    fn non_orthonormal_p_projects_before_truncating() {
        let p = DMatrix::from_row_slice(2, 2, &[10.0, 0.0, 0.0, 1.0]);
        let bz = DMatrix::from_row_slice(2, 2, &[10.0, 0.0, 0.0, 5.0]);
        let z = DMatrix::identity(2, 2);
        let w = constrained_rank_k_regression(&p, &bz, &z, 1).unwrap();
        let cost = (&p * &w - &bz).norm_squared();
        assert!((cost - 25.0).abs() < 1e-9);
    }

    #[test]
    fn dense_sample_gives_exact_projection() {
        let mut r = rng(5);
        let a = gaussian_matrix(25, 25, &mut r);
        let q = random_orthonormal(25, 3, &mut r);
        let s = SampleSet::dense(25);
        let n = sampled_regression(&q, &s, &a).unwrap();
        assert!((n - a.transpose() * &q).norm() < 1e-9);
    }

    #[test]
    fn in_span_target_is_fit_exactly() {
        let mut r = rng(6);
        let q = random_orthonormal(60, 3, &mut r);
        let x = gaussian_matrix(60, 3, &mut r);
        let a = &q * x.transpose();
        let scores: Vec<f64> = q.row_iter().map(|row| row.norm_squared()).collect();
        let s = scores_to_sampleset(&scores, 20, Seed(1)).unwrap();
        let n = sampled_regression(&q, &s, &s.left_apply(&a)).unwrap();
        assert!((&q * n.transpose() - &a).norm() < 1e-8);
    }

    #[test]
    fn rank_deficient_sample_is_singular() {
        let q = random_orthonormal(10, 3, &mut rng(7));
        let s = scores_to_sampleset(&[1.0; 10], 2, Seed(2)).unwrap();
        let a = DMatrix::zeros(2, 10);
        assert!(matches!(sampled_regression(&q, &s, &a), Err(Error::Singular(_))));
    }
}
