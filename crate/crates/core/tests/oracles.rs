//! Library values checked against small independent computations and frozen constants.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use psdsketch::exact::{
    eig_psd, exact_psd_ridge_scores, exact_ridge_regression, exact_ridge_scores, exact_statistical_dimension,
    matrix_sqrt,
};
use psdsketch::generate::{
    gen_counterexample, gen_hard_instance, gen_spectrum_psd, spike_spectrum, HardInstanceSpec, HardVariant,
};
use psdsketch::linalg::gaussian_matrix;
use psdsketch::lowrank::counterexample_demo;
use psdsketch::regression::{estimate_statistical_dimension, ridge_via_factor};
use psdsketch::sampling::scores_to_sampleset;
use psdsketch::scores::{approx_sqrt_ridge_scores, ScoreTarget};
use psdsketch::{AlgoConfig, LowRankFactor, PsdMatrix, PsdOracle, Seed};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Eigenvalues of a symmetric matrix, descending, by nalgebra's symmetric QR.
fn eigenvalues_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// `a_iᵀ (AAᵀ + λI)⁻¹ a_i` with `λ = ‖A − A_k‖_F²/k`, by Cholesky solves.
fn ridge_scores_by_solve(a: &DMatrix<f64>, k: usize) -> Vec<f64> {
    let gram = a * a.transpose();
    let tail: f64 = eigenvalues_desc(&gram).iter().skip(k).map(|v| v.max(0.0)).sum();
    let lambda = tail / k as f64;
    if lambda == 0.0 {
        let pinv = a.clone().pseudo_inverse(1e-10).unwrap();
        let gp = &pinv.transpose() * &pinv;
        return (0..a.ncols()).map(|i| (a.column(i).transpose() * &gp * a.column(i))[(0, 0)]).collect();
    }
    let shifted = &gram + DMatrix::identity(a.nrows(), a.nrows()) * lambda;
    let chol = Cholesky::new(shifted).unwrap();
    (0..a.ncols()).map(|i| a.column(i).dot(&chol.solve(&a.column(i).into_owned()))).collect()
}

#[test]
fn frobenius_norm_of_inverse_square_spectrum() {
    const FROZEN: f64 = 1.0823219916373024;
    let eigs: Vec<f64> = (1..=64).map(|i| (i as f64).powi(-2)).collect();
    let series: f64 = eigs.iter().map(|l| l * l).sum();
    assert!((series - FROZEN).abs() < 1e-15);
    let a = gen_spectrum_psd(64, &eigs, Seed(1)).unwrap();
    assert!((a.frobenius_sq() - FROZEN).abs() < 1e-9);
}

#[test]
fn generator_round_trips_spectrum() {
    let eigs: Vec<f64> = (0..16).map(|i| 3.0 / (1.0 + i as f64)).collect();
    let a = gen_spectrum_psd(16, &eigs, Seed(2)).unwrap();
    let got = eigenvalues_desc(a.as_dmatrix());
    for (g, e) in got.iter().zip(&eigs) {
        assert!((g - e).abs() < 1e-8);
    }
}

#[test]
fn square_root_columns_recover_entries() {
    let g = gaussian_matrix(20, 20, &mut rng(3));
    let a = PsdMatrix::from_dmatrix(&g * g.transpose()).unwrap();
    let r = matrix_sqrt(&a).unwrap();
    let r = r.as_dmatrix();
    for i in 0..20 {
        for j in 0..20 {
            assert!((r.column(i).dot(&r.column(j)) - a.get(i, j)).abs() < 1e-7);
        }
    }
}

#[test]
fn spike_tail_is_n_minus_one() {
    let a = gen_spectrum_psd(100, &spike_spectrum(100), Seed(4)).unwrap();
    assert!((eig_psd(&a).unwrap().frob_tail_sq(1) - 99.0).abs() < 1e-8);
}

#[test]
fn hard_instance_planted_size_and_identity_variant() {
    let spec = HardInstanceSpec { n: 64, k: 2, eps: 0.25, variant: HardVariant::GammaB, seed: Seed(0) };
    assert_eq!(spec.planted_size(), 8);
    let inst = gen_hard_instance(&spec).unwrap();
    for block in &inst.planted {
        assert_eq!(block.len(), 8);
    }
    let nu = HardInstanceSpec { n: 8, k: 1, eps: 0.25, variant: HardVariant::Nu, seed: Seed(5) };
    let inst = gen_hard_instance(&nu).unwrap();
    assert_eq!(inst.matrix.as_dmatrix(), &DMatrix::<f64>::identity(8, 8));
}

#[test]
fn hard_instance_optimum_matches_eigenvalues() {
    for seed in 0..4 {
        let spec = HardInstanceSpec { n: 128, k: 2, eps: 0.5, variant: HardVariant::GammaB, seed: Seed(seed) };
        let inst = gen_hard_instance(&spec).unwrap();
        let tail: f64 = eigenvalues_desc(inst.matrix.as_dmatrix()).iter().skip(2).map(|l| l * l).sum();
        assert!((tail - spec.optimal_tail(inst.planted.len())).abs() < 1e-8);
    }
}

#[test]
fn ridge_scores_of_diagonal() {
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0, 1.0, 1.0]));
    let frozen = [16.0 / 19.0, 0.25, 0.25, 0.25];
    let direct = ridge_scores_by_solve(&a, 1);
    let lib = exact_ridge_scores(&a, 1).unwrap();
    for i in 0..4 {
        assert!((direct[i] - frozen[i]).abs() < 1e-12);
        assert!((lib.scores[i] - frozen[i]).abs() < 1e-10);
    }
}

#[test]
fn ridge_scores_of_all_ones() {
    let a = DMatrix::from_element(4, 4, 1.0);
    let direct = ridge_scores_by_solve(&a, 1);
    let lib = exact_ridge_scores(&a, 1).unwrap();
    for i in 0..4 {
        assert!((direct[i] - 0.25).abs() < 1e-10);
        assert!((lib.scores[i] - 0.25).abs() < 1e-10);
    }
}

#[test]
fn ridge_scores_match_direct_solve_on_random_matrices() {
    let mut r = rng(6);
    for (rows, cols, k) in [(15, 25, 3), (30, 12, 5), (20, 20, 1)] {
        let a = gaussian_matrix(rows, cols, &mut r);
        let direct = ridge_scores_by_solve(&a, k);
        let lib = exact_ridge_scores(&a, k).unwrap();
        for (x, y) in direct.iter().zip(&lib.scores) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn psd_score_targets_match_general_scores() {
    let g = gaussian_matrix(18, 18, &mut rng(7));
    let a = PsdMatrix::from_dmatrix(&g * g.transpose()).unwrap();
    let spec = eig_psd(&a).unwrap();
    let root = matrix_sqrt(&a).unwrap();
    let of_a = exact_psd_ridge_scores(&spec, 4, ScoreTarget::OfA).unwrap();
    let of_root = exact_psd_ridge_scores(&spec, 4, ScoreTarget::OfSqrtA).unwrap();
    let direct_a = ridge_scores_by_solve(a.as_dmatrix(), 4);
    let direct_root = ridge_scores_by_solve(root.as_dmatrix(), 4);
    for i in 0..18 {
        assert!((of_a.scores[i] - direct_a[i]).abs() < 1e-8);
        assert!((of_root.scores[i] - direct_root[i]).abs() < 1e-8);
    }
}

#[test]
fn statistical_dimension_of_small_diagonal() {
    let a = PsdMatrix::from_diagonal(&[2.0, 1.0]).unwrap();
    let spec = eig_psd(&a).unwrap();
    let m = a.as_dmatrix();
    let sq = m * m;
    let direct = (&sq * (&sq + DMatrix::identity(2, 2)).try_inverse().unwrap()).trace();
    assert!((direct - 1.3).abs() < 1e-12);
    assert!((exact_statistical_dimension(&spec, 1.0).unwrap() - 1.3).abs() < 1e-12);
}

#[test]
fn ridge_regression_of_small_diagonal() {
    let a = PsdMatrix::from_diagonal(&[2.0, 1.0]).unwrap();
    let y = DVector::from_vec(vec![3.0, 2.0]);
    let m = a.as_dmatrix();
    let direct = (m * m + DMatrix::identity(2, 2)).lu().solve(&(m * &y)).unwrap();
    let (x, _) = exact_ridge_regression(&a, &eig_psd(&a).unwrap(), &y, 1.0).unwrap();
    for (v, want) in [(direct[0], 1.2), (direct[1], 1.0), (x[0], 1.2), (x[1], 1.0)] {
        assert!((v - want).abs() < 1e-12);
    }
}

#[test]
fn ridge_via_factor_matches_dense_solve() {
    let mut r = rng(8);
    let left = gaussian_matrix(50, 3, &mut r);
    let right = gaussian_matrix(50, 3, &mut r);
    let b = &left * right.transpose();
    let y = gaussian_matrix(50, 1, &mut r).column(0).into_owned();
    let lambda = 0.3;
    let dense = (b.transpose() * &b + DMatrix::identity(50, 50) * lambda)
        .lu()
        .solve(&(b.transpose() * &y))
        .unwrap();
    let f = LowRankFactor::new(left, right).unwrap();
    let x = ridge_via_factor(&f, &y, lambda).unwrap();
    assert!((x - dense).norm() < 1e-8);
}

#[test]
fn counterexample_frozen_ratio() {
    const COST: f64 = 30687.0 / 23.0;
    const RATIO: f64 = 30687.0 / 690.0;
    let (n, k, eps, alpha, beta) = (32, 1, 0.5, 10.0, 1.0);
    let ce = gen_counterexample(n, k, alpha, beta, eps).unwrap();
    let a = ce.a.as_dmatrix();
    assert_eq!(a[(k, k)], 0.0);
    assert_eq!(a[(0, 0)], alpha * alpha);

    let dec = ce.b.clone().svd(false, true);
    let vt = dec.v_t.unwrap();
    let keep: Vec<usize> = (0..dec.singular_values.len()).filter(|&i| dec.singular_values[i] > 1e-10).collect();
    let v = DMatrix::from_fn(n, keep.len(), |r, c| vt[(keep[c], r)]);
    let cost = (a - a * &v * v.transpose()).norm_squared();
    let tail: f64 = eigenvalues_desc(a).iter().skip(k).map(|l| l * l).sum();
    assert!((cost - COST).abs() < 1e-9 * COST);
    assert!((cost / tail - RATIO).abs() < 1e-9 * RATIO);

    let report = counterexample_demo(n, k, eps, alpha, beta).unwrap();
    assert!((report.projection_cost - COST).abs() < 1e-9 * COST);
    assert!((report.closed_form_cost - COST).abs() < 1e-9 * COST);
    assert!((report.ratio - RATIO).abs() < 1e-9 * RATIO);
    let m = (n - k - 1) as f64;
    assert!((report.sqrt_opt_sq - m * beta * beta).abs() < 1e-9);
    assert!((report.sqrt_err_sq - (1.0 + eps) * m * beta * beta).abs() < 1e-9);
}

#[test]
fn identity_scores_land_in_band() {
    let a = PsdMatrix::identity(64);
    let oracle = PsdOracle::new(&a);
    let est = approx_sqrt_ridge_scores(&oracle, 2, &AlgoConfig::default(), Seed(9)).unwrap();
    for s in &est.scores {
        assert!((2.0 / 64.0 - 1e-12..=6.0 / 64.0 + 1e-12).contains(s), "score {s}");
    }
}

#[test]
fn statistical_dimension_estimate_on_identity() {
    let n = 128;
    let a = PsdMatrix::identity(n);
    let exact = exact_statistical_dimension(&eig_psd(&a).unwrap(), 1.0).unwrap();
    assert!((exact - n as f64 / 2.0).abs() < 1e-9);
    let oracle = PsdOracle::new(&a);
    let est = estimate_statistical_dimension(&oracle, 1.0, &AlgoConfig::default(), Seed(10)).unwrap();
    assert!(est.value >= exact / 4.0 && est.value <= exact * 4.0, "estimate {}", est.value);
}

#[test]
fn sampling_preserves_squared_norm_in_expectation() {
    let x: Vec<f64> = (0..40).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
    let target: f64 = x.iter().map(|v| v * v).sum();
    let scores: Vec<f64> = (0..40).map(|i| 1.0 + (i % 5) as f64).collect();
    let draws = 10_000;
    let values: Vec<f64> = (0..draws)
        .map(|d| {
            let s = scores_to_sampleset(&scores, 6, Seed(d)).unwrap();
            let m = DMatrix::from_column_slice(40, 1, &x);
            s.left_apply(&m).norm_squared()
        })
        .collect();
    let mean = values.iter().sum::<f64>() / draws as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let se = (var / draws as f64).sqrt();
    assert!((mean - target).abs() <= 3.0 * se, "mean {mean} target {target} se {se}");
}
