mod common;

use mghfa::data::{default_names, DEFAULT_MISSING_TOKENS};
use mghfa::{
    apply_mar, ari, err, gig_moments, log_bessel_k, read_csv, write_csv, DataMatrix, GigParams, MarPattern, MarSpec,
};
use proptest::prelude::*;

fn labels(max_g: usize) -> impl Strategy<Value = Vec<usize>> {
    (2usize..60).prop_flat_map(move |n| prop::collection::vec(0..max_g, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bessel_is_even_in_order(v in -30.0f64..30.0, x in 1e-3f64..200.0) {
        let a = log_bessel_k(v, x).unwrap();
        let b = log_bessel_k(-v, x).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn bessel_decreases_in_argument(v in -10.0f64..10.0, x in 0.01f64..50.0, dx in 0.01f64..5.0) {
        prop_assert!(log_bessel_k(v, x + dx).unwrap() < log_bessel_k(v, x).unwrap());
    }

    #[test]
    fn gig_moments_satisfy_jensen(lambda in -8.0f64..8.0, chi in 0.05f64..20.0, psi in 0.05f64..20.0) {
        let m = gig_moments(&GigParams::new(lambda, chi, psi).unwrap()).unwrap();
        prop_assert!(m.e_w > 0.0 && m.e_inv_w > 0.0);
        prop_assert!(m.e_w * m.e_inv_w >= 1.0 - 1e-12);
        prop_assert!(m.e_log_w <= m.e_w.ln() + 1e-12);
        prop_assert!(-m.e_log_w <= m.e_inv_w.ln() + 1e-12);
    }

    #[test]
    fn ari_is_symmetric_and_bounded(a in labels(5), seed in any::<u64>()) {
        use rand::Rng;
        let mut r = common::rng(seed);
        let b: Vec<usize> = a.iter().map(|&l| if r.random::<f64>() < 0.3 { r.random_range(0..5) } else { l }).collect();
        let ab = ari(&a, &b).unwrap();
        let ba = ari(&b, &a).unwrap();
        prop_assert!(ab.is_nan() && ba.is_nan() || (ab - ba).abs() < 1e-12);
        prop_assert!(ab.is_nan() || ab <= 1.0 + 1e-12);
    }

    #[test]
    fn err_is_zero_under_relabeling(a in labels(4), shift in 1usize..4) {
        let relabeled: Vec<usize> = a.iter().map(|&l| (l + shift) % 4).collect();
        prop_assert_eq!(err(&relabeled, &a).unwrap(), 0.0);
        let e = err(&vec![0; a.len()], &a).unwrap();
        prop_assert!((0.0..1.0).contains(&e));
    }

    #[test]
    fn mar_spec_totals(n in 3usize..2000, rate in 0.0f64..0.9, k in 1u8..=3) {
        let spec = MarSpec::new(MarPattern::from_index(k).unwrap(), rate, n).unwrap();
        prop_assert_eq!(spec.total(), (n as f64 * rate).round() as usize);
    }

    #[test]
    fn mar_removal_keeps_rows_observed(n_per in 10usize..40, rate in 0.0f64..0.4, k in 1u8..=3, seed in any::<u64>()) {
        use rand::Rng;
        let mut r = common::rng(seed);
        let n = 3 * n_per;
        let p = 4;
        let values: Vec<f64> = (0..n * p).map(|_| r.random::<f64>()).collect();
        let d = DataMatrix::complete(n, p, values, default_names(p)).unwrap();
        let spec = MarSpec::new(MarPattern::from_index(k).unwrap(), rate, n).unwrap();
        match apply_mar(&d, &spec, &mut r) {
            Ok(out) => {
                prop_assert_eq!(out.n_missing(), p * spec.total());
                for i in 0..n {
                    prop_assert!(out.mask_row(i).iter().any(|&m| m));
                }
                for j in 0..p {
                    let removed = (0..n).filter(|&i| !out.is_observed(i, j)).count();
                    prop_assert_eq!(removed, spec.total());
                }
            }
            // Only possible when a block runs out of removable cells.
            Err(e) => {
                let expected = matches!(e, mghfa::Error::InvalidData(_) | mghfa::Error::InvalidParameter { .. });
                prop_assert!(expected, "unexpected error {}", e);
            }
        }
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec(prop::collection::vec(prop::option::weighted(0.8, -1e12f64..1e12), 3), 1..20)) {
        let rows: Vec<Vec<Option<f64>>> = rows.into_iter().filter(|r| r.iter().any(Option::is_some)).collect();
        prop_assume!(!rows.is_empty());
        let n = rows.len();
        let values: Vec<f64> = rows.iter().flatten().map(|v| v.unwrap_or(f64::NAN)).collect();
        let mask: Vec<bool> = rows.iter().flatten().map(Option::is_some).collect();
        let d = DataMatrix::new(n, 3, values, mask, default_names(3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_csv(&path, &d).unwrap();
        let back = read_csv(&path, &DEFAULT_MISSING_TOKENS).unwrap();
        prop_assert_eq!(back.mask(), d.mask());
        for i in 0..n {
            for j in 0..3 {
                prop_assert_eq!(back.get(i, j).map(f64::to_bits), d.get(i, j).map(f64::to_bits));
            }
        }
    }
}
