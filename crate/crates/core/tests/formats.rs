use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use psdsketch::formats::{
    lrkf_from_bytes, lrkf_to_bytes, matrix_from_csv, matrix_to_csv, psdm_from_bytes, psdm_to_bytes, read_lrkf,
    read_matrix, read_vector, vector_from_bytes, vector_to_bytes, write_lrkf, write_matrix, write_vector, PSDM_MAGIC,
};
use psdsketch::{Error, LowRankFactor, PsdMatrix};

fn bits(m: &DMatrix<f64>) -> Vec<u64> {
    m.iter().map(|v| v.to_bits()).collect()
}

fn psd_from_entries(n: usize, raw: &[f64]) -> PsdMatrix {
    let g = DMatrix::from_column_slice(n, n, &raw[..n * n]);
    PsdMatrix::from_dmatrix(&g * g.transpose()).unwrap()
}

#[test]
fn matrix_files_round_trip_by_extension() {
    let d = tempfile::tempdir().unwrap();
    let a = psd_from_entries(3, &[0.1, -2.0, 1.0 / 3.0, 4.5, 1e-300, 7.0, -0.25, 3.0, 1e10]);
    for name in ["m.psdm", "m.bin", "m.csv", "m.CSV"] {
        let path = d.path().join(name);
        write_matrix(&path, &a).unwrap();
        let back = read_matrix(&path).unwrap();
        assert_eq!(bits(back.as_dmatrix()), bits(a.as_dmatrix()), "{name}");
    }
    let raw = std::fs::read(d.path().join("m.psdm")).unwrap();
    assert_eq!(&raw[..4], PSDM_MAGIC);
    assert_eq!(raw.len(), 4 + 4 + 8 + 8 * 9);
}

#[test]
fn factor_files_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let path = d.path().join("f.lrkf");
    let general = LowRankFactor::new(DMatrix::from_fn(5, 2, |i, j| i as f64 - j as f64 / 7.0), DMatrix::from_fn(5, 2, |i, j| (i * j) as f64 + 0.5)).unwrap();
    write_lrkf(&path, &general).unwrap();
    let back = read_lrkf(&path).unwrap();
    assert!(!back.symmetric_psd);
    assert_eq!(bits(&back.left), bits(&general.left));
    assert_eq!(bits(&back.right), bits(&general.right));

    let sym = LowRankFactor::symmetric(DMatrix::from_fn(6, 3, |i, j| (i + 2 * j) as f64 / 9.0));
    write_lrkf(&path, &sym).unwrap();
    let back = read_lrkf(&path).unwrap();
    assert!(back.symmetric_psd);
    assert_eq!(back.to_dense(), sym.to_dense());
}

#[test]
fn vector_files_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let v = DVector::from_vec(vec![1.0, -0.1, f64::MIN_POSITIVE, 1.0 / 3.0, 6.02e23]);
    for name in ["v.csv", "v.bin"] {
        let path = d.path().join(name);
        write_vector(&path, &v).unwrap();
        assert_eq!(read_vector(&path).unwrap(), v, "{name}");
    }
}

#[test]
fn damaged_binaries_are_rejected() {
    let a = psd_from_entries(2, &[1.0, 0.5, -0.5, 2.0]);
    let good = psdm_to_bytes(&a);
    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    let mut bad_version = good.clone();
    bad_version[4] = 9;
    let mut trailing = good.clone();
    trailing.push(0);
    for bytes in [&bad_magic[..], &bad_version[..], &good[..good.len() - 1], &trailing[..], &[][..]] {
        assert!(matches!(psdm_from_bytes(bytes), Err(Error::Format { .. })));
    }

    let f = LowRankFactor::symmetric(DMatrix::from_element(3, 1, 1.0));
    let fb = lrkf_to_bytes(&f);
    assert!(lrkf_from_bytes(&fb[..fb.len() - 3]).is_err());
    assert!(vector_from_bytes(&[1, 0, 0, 0, 0, 0, 0, 0]).is_err());
}

#[test]
fn malformed_csv_is_rejected() {
    assert!(matrix_from_csv("1,2\n3\n").is_err());
    assert!(matrix_from_csv("1,x\n").is_err());
    let d = tempfile::tempdir().unwrap();
    let path = d.path().join("m.csv");
    std::fs::write(&path, "1,0,0\n0,1,0\n").unwrap();
    assert!(read_matrix(&path).is_err());
    std::fs::write(&path, "1,0.5\n0.1,1\n").unwrap();
    assert_eq!(read_matrix(&path).unwrap().get(0, 1), 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psdm_bytes_round_trip(n in 1usize..7, raw in proptest::collection::vec(-1e3f64..1e3, 49)) {
        let a = psd_from_entries(n, &raw);
        let back = psdm_from_bytes(&psdm_to_bytes(&a)).unwrap();
        prop_assert_eq!(bits(back.as_dmatrix()), bits(a.as_dmatrix()));
    }

    #[test]
    fn csv_round_trip_is_exact(rows in 1usize..5, cols in 1usize..5, raw in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 16)) {
        let m = DMatrix::from_fn(rows, cols, |i, j| raw[i * 4 + j]);
        let back = matrix_from_csv(&matrix_to_csv(&m)).unwrap();
        prop_assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn lrkf_bytes_round_trip(n in 1usize..8, w in 0usize..4, raw in proptest::collection::vec(-10.0f64..10.0, 64), sym in any::<bool>()) {
        let left = DMatrix::from_fn(n, w, |i, j| raw[i * 4 + j]);
        let f = if sym {
            LowRankFactor::symmetric(left)
        } else {
            LowRankFactor::new(left, DMatrix::from_fn(n, w, |i, j| raw[32 + i * 4 + j])).unwrap()
        };
        let back = lrkf_from_bytes(&lrkf_to_bytes(&f)).unwrap();
        prop_assert_eq!(back.symmetric_psd, f.symmetric_psd);
        prop_assert_eq!(bits(&back.left), bits(&f.left));
        prop_assert_eq!(bits(&back.right), bits(&f.right));
    }

    #[test]
    fn vector_bytes_round_trip(raw in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..20)) {
        let v = DVector::from_vec(raw);
        prop_assert_eq!(vector_from_bytes(&vector_to_bytes(&v)).unwrap(), v);
    }
}
