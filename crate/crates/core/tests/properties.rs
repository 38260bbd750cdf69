use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use streaming_opinf::experiment::{compare_runs, ExperimentConfig};
use streaming_opinf::io::{read_matrix, write_matrix};
use streaming_opinf::linalg::{orthonormality_defect, singular_values};
use streaming_opinf::metrics::{subspace_angle_error, MetricTable};
use streaming_opinf::opinf::{spline_weights, Layout, Quadratic, ReducedModel};
use streaming_opinf::recursive_ls::{augment, batch_ls, Regularizer, Rls, SqrtRls};
use streaming_opinf::stream_svd::{BakerIsvd, SketchySvd};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-1.0f64..1.0, rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn sized_matrix(
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
) -> impl Strategy<Value = DMatrix<f64>> {
    (rows, cols).prop_flat_map(|(r, c)| matrix(r, c))
}

fn quadratic() -> impl Strategy<Value = Quadratic> {
    prop_oneof![
        Just(Quadratic::None),
        Just(Quadratic::Full),
        Just(Quadratic::Unique)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn baker_factors_stay_orthonormal_and_sorted(x in sized_matrix(3..12, 1..30), r_max in 1usize..6) {
        let mut isvd = BakerIsvd::new(x.nrows(), r_max, true);
        for c in x.column_iter() {
            isvd.push(c.as_slice()).unwrap();
        }
        let t = isvd.into_svd();
        prop_assert!(t.rank() <= r_max.min(x.nrows()).min(x.ncols()));
        prop_assert!(orthonormality_defect(&t.v) < 1e-10);
        prop_assert!(t.s.iter().all(|&s| s >= 0.0));
        prop_assert!(t.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
        let w = t.w.unwrap();
        prop_assert_eq!(w.nrows(), x.ncols());
    }

    #[test]
    fn baker_without_truncation_is_exact(x in sized_matrix(2..8, 2..8)) {
        let full = x.nrows().min(x.ncols());
        let mut isvd = BakerIsvd::new(x.nrows(), full, true);
        for c in x.column_iter() {
            isvd.push(c.as_slice()).unwrap();
        }
        let t = isvd.into_svd();
        let exact = singular_values(&x);
        for i in 0..t.rank() {
            prop_assert!((t.s[i] - exact[i]).abs() <= 1e-10 * exact[0].max(1.0));
        }
        let recon = &t.v * DMatrix::from_diagonal(&t.s) * t.w.unwrap().transpose();
        prop_assert!((recon - &x).norm() <= 1e-9 * x.norm().max(1.0));
    }

    #[test]
    fn sketch_recovers_exactly_low_rank(l in sized_matrix(20..40, 1..3), seed in any::<u64>()) {
        let r = l.ncols();
        let right = DMatrix::from_fn(r, 30, |i, j| ((i * 7 + j * 3) as f64).sin() + (i == j % r) as u8 as f64);
        let x = &l * right;
        let mut sk = SketchySvd::new(x.nrows(), x.ncols(), r, seed);
        for c in x.column_iter() {
            sk.push(c.as_slice()).unwrap();
        }
        let t = sk.finalize().unwrap();
        let recon = &t.v * DMatrix::from_diagonal(&t.s) * t.w.unwrap().transpose();
        prop_assert!((recon - &x).norm() / x.norm() < 1e-9);
    }

    #[test]
    fn recursive_forms_match_batch(d in sized_matrix(5..40, 1..8), r in 1usize..4, gamma in 1e-3f64..10.0) {
        let rhs = DMatrix::from_fn(d.nrows(), r, |i, j| ((i + 3 * j) as f64).cos());
        let reg = Regularizer::uniform(gamma, d.ncols()).unwrap();
        let (dbar, rbar) = augment(&d, &rhs, &reg).unwrap();
        let batch = batch_ls(&dbar, &rbar).unwrap();
        let mut rls = Rls::new(&reg, r);
        let mut iqr = SqrtRls::new(&reg, r);
        for i in 0..d.nrows() {
            let dr: Vec<f64> = d.row(i).iter().copied().collect();
            let rr: Vec<f64> = rhs.row(i).iter().copied().collect();
            rls.update(&dr, &rr).unwrap();
            iqr.update(&dr, &rr).unwrap();
        }
        let scale = batch.norm().max(1e-12);
        prop_assert!((rls.operator() - &batch).norm() / scale < 1e-8);
        prop_assert!((iqr.operator() - &batch).norm() / scale < 1e-8);
    }

    #[test]
    fn layout_rows_have_operator_width(r in 1usize..6, m in 0usize..3, constant in any::<bool>(), q in quadratic(),
                                       x in proptest::collection::vec(-2.0f64..2.0, 6)) {
        let layout = Layout { r, quadratic: q, m, constant };
        let expect = r + q.count(r) + m + constant as usize;
        prop_assert_eq!(layout.dim(), expect);
        let u = vec![0.5; m];
        prop_assert_eq!(layout.row(&x[..r], &u).len(), expect);
        match q {
            Quadratic::None => prop_assert_eq!(q.count(r), 0),
            Quadratic::Full => prop_assert_eq!(q.count(r), r * r),
            Quadratic::Unique => prop_assert_eq!(q.count(r), r * (r + 1) / 2),
        }
    }

    #[test]
    fn operator_round_trip_preserves_dynamics(r in 1usize..5, q in quadratic(), seed in 0u64..1000,
                                              x in proptest::collection::vec(-1.0f64..1.0, 5)) {
        let layout = Layout { r, quadratic: q, m: 1, constant: true };
        let omega = DMatrix::from_fn(layout.dim(), r, |i, j| (((i * 31 + j * 17) as u64 + seed) as f64).sin());
        let model = ReducedModel::from_operator(&omega, &layout).unwrap();
        let back = model.to_operator(&layout).unwrap();
        let again = ReducedModel::from_operator(&back, &layout).unwrap();
        let xh = DVector::from_column_slice(&x[..r]);
        let a = model.rhs(&xh, &[0.3]);
        let b = again.rhs(&xh, &[0.3]);
        prop_assert!((a - b).norm() < 1e-12);
        // The operator predicts the same rate as the regression row.
        let row = layout.row(xh.as_slice(), &[0.3]);
        let pred = omega.tr_mul(&DVector::from_vec(row));
        prop_assert!((pred - model.rhs(&xh, &[0.3])).norm() < 1e-12);
    }

    #[test]
    fn subspace_error_ignores_rotations(v in sized_matrix(6..12, 1..4), rot in matrix(3, 3)) {
        let qv = v.clone().qr().q();
        let k = qv.ncols();
        let q = rot.view((0, 0), (k, k)).into_owned() + DMatrix::identity(k, k) * 3.0;
        let qq = q.qr().q();
        prop_assert!(subspace_angle_error(&qv, &(&qv * qq)).unwrap() < 1e-10);
    }

    #[test]
    fn spline_weights_are_a_partition_of_unity(mu in 0.1f64..1.0) {
        let nodes = [0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0];
        let w = spline_weights(&nodes, mu).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Linear functions are reproduced.
        let lin: f64 = w.iter().zip(&nodes).map(|(wi, x)| wi * (2.0 * x - 1.0)).sum();
        prop_assert!((lin - (2.0 * mu - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn srom_files_round_trip(x in sized_matrix(1..9, 0..9)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.srom");
        write_matrix(&p, &x).unwrap();
        prop_assert_eq!(read_matrix(&p).unwrap(), x);
    }

    #[test]
    fn config_serialization_round_trips(r in proptest::collection::btree_set(1usize..30, 1..6), seed in any::<u64>(),
                                        g in 1e-12f64..1.0, kse in any::<bool>()) {
        let mut cfg = if kse { ExperimentConfig::kse() } else { ExperimentConfig::burgers() };
        cfg.r = r.into_iter().collect();
        cfg.seed = seed;
        cfg.gamma1 = g;
        let text = cfg.serialize();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(back.serialize(), text);
        prop_assert_eq!(back.r, cfg.r);
        prop_assert_eq!(back.gamma1, g);
    }

    #[test]
    fn identical_runs_compare_to_unit_ratios(values in proptest::collection::vec(0.001f64..100.0, 1..8)) {
        let dir = tempfile::tempdir().unwrap();
        let mut t = MetricTable::new("final_rse", &["method", "r", "final_rse"]);
        for (i, v) in values.iter().enumerate() {
            t.push(["isvd-rls-iqr".to_string(), (i + 1).to_string(), v.to_string()]).unwrap();
        }
        t.write_to(dir.path()).unwrap();
        let rows = compare_runs(dir.path(), dir.path()).unwrap();
        prop_assert_eq!(rows.len(), values.len());
        prop_assert!(rows.iter().all(|row| row.ratio() == 1.0));
    }
}
