//! Dense linear-algebra helpers shared by the exact and sampled paths.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative cutoff below which singular values are treated as zero in pseudoinverses.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
pub fn sym_eig_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let max_iter = 100 * (n + 10);
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, max_iter)
        .filter(|e| e.eigenvalues.iter().all(|v| v.is_finite()))
        .map(|e| (e.eigenvalues, e.eigenvectors))
        .unwrap_or_else(|| {
            // Same remedy as for the SVD: diagonalise a random similarity transform.
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0xe16);
            let q = random_orthonormal(n, n, &mut rng);
            let rotated = q.transpose() * m * &q;
            let e = SymmetricEigen::new((&rotated + rotated.transpose()) * 0.5);
            (e.eigenvalues, &q * e.eigenvectors)
        });
    let (vals, vecs) = eig;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| vals[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| vecs[(r, order[c])]);
    (values, vectors)
}

/// Thin SVD `m = U diag(s) Vᵀ` with singular values sorted descending.
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn svd(m: &DMatrix<f64>) -> Svd {
    let (r, c) = m.shape();
    if r.min(c) == 0 {
        return Svd { u: DMatrix::zeros(r, 0), s: vec![], v: DMatrix::zeros(c, 0) };
    }
    if let Some(d) = try_svd(m) {
        return d;
    }
    // The implicit-shift iteration can stall on highly structured inputs, e.g.
    // sketches with many exactly repeated singular values. A random rotation of
    // the smaller side leaves the singular values unchanged and breaks the structure.
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0x5eed);
    for _ in 0..3 {
        if c <= r {
            let q = random_orthonormal(c, c, &mut rng);
            if let Some(d) = try_svd(&(m * &q)) {
                return Svd { v: &q * d.v, ..d };
            }
        } else {
            let q = random_orthonormal(r, r, &mut rng);
            if let Some(d) = try_svd(&(q.transpose() * m)) {
                return Svd { u: &q * d.u, ..d };
            }
        }
    }
    gram_svd(m)
}

fn try_svd(m: &DMatrix<f64>) -> Option<Svd> {
    let (r, c) = m.shape();
    let p = r.min(c);
    let dec = nalgebra::SVD::try_new_unordered(m.clone(), true, true, f64::EPSILON, 100 * (p + 10))?;
    if dec.singular_values.iter().any(|s| !s.is_finite()) {
        return None;
    }
    let u = dec.u?;
    let vt = dec.v_t?;
    if u.iter().chain(vt.iter()).any(|x| !x.is_finite()) {
        return None;
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]).then(a.cmp(&b)));
    Some(Svd {
        u: DMatrix::from_fn(r, p, |i, j| u[(i, order[j])]),
        s: order.iter().map(|&i| dec.singular_values[i]).collect(),
        v: DMatrix::from_fn(c, p, |i, j| vt[(order[j], i)]),
    })
}

/// Last resort: eigenvectors of the smaller Gram matrix. Loses accuracy on
/// small singular values but always terminates.
fn gram_svd(m: &DMatrix<f64>) -> Svd {
    let (r, c) = m.shape();
    let p = r.min(c);
    let t = m.transpose();
    let small = if c <= r { m } else { &t };
    let (vals, vecs) = sym_eig_desc(&small.tr_mul(small));
    let s: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    let top = s.first().copied().unwrap_or(0.0);
    let basis = vecs.columns(0, p).into_owned();
    let mut other_side = small * &basis;
    for j in 0..p {
        if s[j] > PINV_CUTOFF * top {
            other_side.column_mut(j).scale_mut(1.0 / s[j]);
        } else {
            other_side.column_mut(j).fill(0.0);
        }
    }
    if c <= r {
        Svd { u: other_side, s, v: basis }
    } else {
        Svd { u: basis, s, v: other_side }
    }
}

/// Number of singular values above the pseudoinverse cutoff.
pub fn numerical_rank(s: &[f64]) -> usize {
    let top = s.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    s.iter().take_while(|&&x| x > PINV_CUTOFF * top).count()
}

/// Moore–Penrose pseudoinverse.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = svd(m);
    let r = numerical_rank(&d.s);
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for j in 0..r {
        let v = d.v.column(j);
        let u = d.u.column(j);
        out += (v * u.transpose()) / d.s[j];
    }
    out
}

/// Orthonormal basis of the column space, rank-revealing via SVD.
pub fn orthonormal_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = svd(m);
    let r = numerical_rank(&d.s);
    d.u.columns(0, r).into_owned()
}

/// Orthonormal basis from a Householder QR, or `None` when the columns are
/// numerically dependent.
pub fn qr_basis(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let qr = m.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].abs()).collect();
    let top = diag.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 || diag.iter().any(|&d| d <= PINV_CUTOFF * top) {
        return None;
    }
    Some(qr.q())
}

/// Top-`r` right singular vectors as columns.
pub fn top_right_singular_vectors(m: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let d = svd(m);
    let r = r.min(d.s.len());
    d.v.columns(0, r).into_owned()
}

/// Best rank-`k` approximation of a small dense matrix.
pub fn truncate_rank(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let d = svd(m);
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for j in 0..k.min(d.s.len()) {
        out += d.u.column(j) * d.v.column(j).transpose() * d.s[j];
    }
    out
}

pub fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Uniformly random `n × k` matrix with orthonormal columns.
pub fn random_orthonormal<R: Rng>(n: usize, k: usize, rng: &mut R) -> DMatrix<f64> {
    let g = gaussian_matrix(n, k, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fix column signs so the distribution is Haar rather than sign-biased.
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Largest eigenvalue of a symmetric PSD operator given by its action,
/// via Lanczos with full reorthogonalisation and restarts.
pub fn top_eigenvalue_psd<F>(n: usize, apply: F, start: &DVector<f64>) -> f64
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let max_basis = n.min(80);
    let mut v0 = start.clone();
    let mut best = 0.0f64;
    for _restart in 0..20 {
        let norm = v0.norm();
        if norm == 0.0 {
            return best;
        }
        let mut basis: Vec<DVector<f64>> = vec![v0 / norm];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut converged = false;
        let ritz_vec;
        loop {
            let j = basis.len() - 1;
            let mut w = apply(&basis[j]);
            let a = basis[j].dot(&w);
            alpha.push(a);
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dot(&w);
                    w.axpy(-c, q, 1.0);
                }
            }
            let b = w.norm();
            let m = alpha.len();
            let mut t = DMatrix::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alpha[i];
                if i + 1 < m {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let (vals, vecs) = sym_eig_desc(&t);
            let theta = vals[0];
            best = best.max(theta);
            let resid = (b * vecs[(m - 1, 0)]).abs();
            if resid <= 1e-13 * theta.abs().max(f64::MIN_POSITIVE) || b <= 1e-300 || m >= n {
                converged = true;
            }
            if converged || m >= max_basis {
                let mut y = DVector::zeros(n);
                for (i, q) in basis.iter().enumerate() {
                    y.axpy(vecs[(i, 0)], q, 1.0);
                }
                ritz_vec = y;
                break;
            }
            beta.push(b);
            basis.push(w / b);
        }
        if converged {
            return best;
        }
        v0 = ritz_vec;
    }
    best
}

/// Squared spectral norm of a general matrix given by `x ↦ Mx` and `y ↦ Mᵀy`.
pub fn spectral_norm_sq<F, G>(cols: usize, apply: F, apply_t: G) -> f64
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    // Deterministic, generic start vector.
    let start = DVector::from_fn(cols, |i, _| 1.0 + ((i as f64) * 0.618_033_988_75).fract());
    top_eigenvalue_psd(cols, |x| apply_t(&apply(x)), &start)
}

pub fn dense_spectral_norm_sq(m: &DMatrix<f64>) -> f64 {
    if m.nrows().min(m.ncols()) <= 200 {
        return svd(m).s.first().map_or(0.0, |s| s * s);
    }
    spectral_norm_sq(m.ncols(), |x| m * x, |y| m.tr_mul(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn svd_is_sorted_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = gaussian_matrix(7, 4, &mut rng);
        let d = svd(&m);
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        let rec = &d.u * DMatrix::from_diagonal(&DVector::from_vec(d.s.clone())) * d.v.transpose();
        assert!((rec - m).norm() < 1e-12);
    }

    #[test]
    fn pinv_of_rank_one() {
        let m = DMatrix::from_element(3, 3, 1.0);
        let p = pinv(&m);
        assert!((p - DMatrix::from_element(3, 3, 1.0 / 9.0)).norm() < 1e-14);
    }

    #[test]
    fn qr_basis_detects_dependence() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(qr_basis(&m).is_none());
        assert_eq!(orthonormal_basis(&m).ncols(), 1);
    }

    #[test]
    fn gram_fallback_agrees_with_svd() {
        let mut r = ChaCha8Rng::seed_from_u64(21);
        for (rows, cols) in [(30, 8), (8, 30)] {
            let m = gaussian_matrix(rows, cols, &mut r);
            let a = svd(&m);
            let b = gram_svd(&m);
            for j in 0..8 {
                assert!((a.s[j] - b.s[j]).abs() < 1e-10 * a.s[0]);
            }
            let recon = &b.u * DMatrix::from_diagonal(&DVector::from_vec(b.s.clone())) * b.v.transpose();
            assert!((recon - &m).norm() < 1e-9 * m.norm());
        }
    }

    #[test]
    fn lanczos_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = gaussian_matrix(300, 260, &mut rng);
        let exact = svd(&m).s[0].powi(2);
        let approx = spectral_norm_sq(260, |x| &m * x, |y| m.tr_mul(y));
        assert!((exact - approx).abs() <= 1e-9 * exact, "{exact} vs {approx}");
    }

    #[test]
    fn random_orthonormal_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_orthonormal(20, 6, &mut rng);
        assert!((q.tr_mul(&q) - DMatrix::identity(6, 6)).norm() < 1e-12);
    }
}
