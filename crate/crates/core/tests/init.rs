mod common;

use mghfa::init::{column_means, params_from_labels, MIN_INIT_PSI};
use mghfa::{ari, init_params, kmeans, mean_impute, simulate, table1_model, DataMatrix, InitConfig, SimSpec};
use rand::Rng;

const NA: f64 = f64::NAN;

#[test]
fn mean_impute_examples() {
    let d = DataMatrix::from_rows(&[vec![1.0, 0.5], vec![NA, 0.5], vec![3.0, 0.5]]).unwrap();
    let f = mean_impute(&d).unwrap();
    assert!(f.is_complete());
    assert_eq!(f.observed(1, 0), 2.0);

    let d = DataMatrix::from_rows(&[vec![5.0, 1.0], vec![NA, 2.0], vec![NA, 3.0]]).unwrap();
    let f = mean_impute(&d).unwrap();
    assert_eq!([f.observed(0, 0), f.observed(1, 0), f.observed(2, 0)], [5.0, 5.0, 5.0]);

    let full = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
    assert_eq!(mean_impute(&full).unwrap(), full);
}

#[test]
fn mean_impute_keeps_observed_cells() {
    let d = common::masked(
        &[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0], vec![1.5, 2.5, 3.5]],
        &[vec![true, false, true], vec![true, true, false], vec![false, true, true], vec![true, true, true]],
    );
    let f = mean_impute(&d).unwrap();
    let means = column_means(&d).unwrap();
    assert!((means[0] - 6.5 / 3.0).abs() < 1e-15);
    for i in 0..4 {
        for j in 0..3 {
            let expect = if d.is_observed(i, j) { d.observed(i, j) } else { means[j] };
            assert_eq!(f.observed(i, j), expect);
        }
    }
}

#[test]
fn fully_missing_column_is_an_error() {
    let d = common::masked(&[vec![1.0, 2.0], vec![3.0, 4.0]], &[vec![true, false], vec![true, false]]);
    assert!(mean_impute(&d).is_err());
}

fn two_clouds(seed: u64) -> (DataMatrix, Vec<usize>) {
    let mut r = common::rng(seed);
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    for i in 0..60 {
        let k = i % 2;
        let centre = if k == 0 { -20.0 } else { 20.0 };
        rows.push((0..3).map(|_| centre + r.random::<f64>() - 0.5).collect());
        truth.push(k);
    }
    (DataMatrix::from_rows(&rows).unwrap(), truth)
}

#[test]
fn kmeans_separates_clouds() {
    let (d, truth) = two_clouds(1);
    let labels = kmeans(&d, 2, &InitConfig::default(), &mut common::rng(2)).unwrap();
    assert_eq!(ari(&labels, &truth).unwrap(), 1.0);
}

#[test]
fn kmeans_single_and_singleton_clusters() {
    let (d, _) = two_clouds(3);
    let cfg = InitConfig::default();
    assert!(kmeans(&d, 1, &cfg, &mut common::rng(0)).unwrap().iter().all(|&l| l == 0));
    let small = d.select_rows(&(0..7).collect::<Vec<_>>()).unwrap();
    let mut labels = kmeans(&small, 7, &cfg, &mut common::rng(0)).unwrap();
    labels.sort_unstable();
    assert_eq!(labels, (0..7).collect::<Vec<_>>());
    assert!(kmeans(&small, 8, &cfg, &mut common::rng(0)).is_err());
    assert!(kmeans(&small, 0, &cfg, &mut common::rng(0)).is_err());
}

#[test]
fn kmeans_is_deterministic() {
    let spec = SimSpec::new(table1_model(), vec![50, 50, 50], 9).unwrap();
    let d = simulate::simulate_seeded(&spec).unwrap().0;
    let cfg = InitConfig::default();
    let a = kmeans(&d, 3, &cfg, &mut common::rng(11)).unwrap();
    let b = kmeans(&d, 3, &cfg, &mut common::rng(11)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn identity_scatter_loadings() {
    // ±√3 along each axis gives scatter I₃.
    let s = 3f64.sqrt();
    let mut rows = Vec::new();
    for j in 0..3 {
        for sign in [1.0, -1.0] {
            let mut r = vec![0.0; 3];
            r[j] = sign * s;
            rows.push(r);
        }
    }
    let d = DataMatrix::from_rows(&rows).unwrap();
    let m = params_from_labels(&d, &[0; 6], 1, 1, &InitConfig::default()).unwrap();
    let l = m.loadings[0].column(0);
    assert!((l[0].abs() - 1.0).abs() < 1e-12, "{l}");
    assert!(l[1].abs() < 1e-12 && l[2].abs() < 1e-12);
    assert!(m.psi[0][0] < 1e-9);
    assert!((m.psi[0][1] - 1.0).abs() < 1e-12 && (m.psi[0][2] - 1.0).abs() < 1e-12);
}

#[test]
fn diagonal_scatter_loadings() {
    let rows = vec![vec![2.0, 1.0], vec![-2.0, -1.0], vec![2.0, -1.0], vec![-2.0, 1.0]];
    let d = DataMatrix::from_rows(&rows).unwrap();
    let m = params_from_labels(&d, &[0, 0, 0, 0], 1, 1, &InitConfig::default()).unwrap();
    assert!((m.loadings[0][(0, 0)] - 2.0).abs() < 1e-12);
    assert!(m.loadings[0][(1, 0)].abs() < 1e-12);
    assert!(m.psi[0][0] >= MIN_INIT_PSI);
    assert!(m.psi[0][0] < 1e-9);
    assert!((m.psi[0][1] - 1.0).abs() < 1e-12);
}

#[test]
fn starting_values_on_table1_data() {
    let spec = SimSpec::new(table1_model(), vec![100, 100, 100], 5).unwrap();
    let d = simulate::simulate_seeded(&spec).unwrap().0;
    let cfg = InitConfig::default();
    let m = init_params(&d, 3, 2, &cfg, &mut common::rng(6)).unwrap();
    m.validate().unwrap();
    assert!((m.pi.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    for k in 0..3 {
        assert_eq!(m.lambda[k], 1.0);
        assert_eq!(m.omega[k], 1.0);
        assert!(m.beta[k].iter().all(|&b| b == 1e-3));
        assert!(m.psi[k].iter().all(|&v| v >= MIN_INIT_PSI));
    }
    let again = init_params(&d, 3, 2, &cfg, &mut common::rng(6)).unwrap();
    assert_eq!(m, again);
}

#[test]
fn moments_match_cluster_statistics() {
    let (d, truth) = two_clouds(4);
    let m = params_from_labels(&d, &truth, 2, 1, &InitConfig::default()).unwrap();
    for k in 0..2 {
        let rows: Vec<usize> = (0..60).filter(|&i| truth[i] == k).collect();
        assert!((m.pi[k] - 0.5).abs() < 1e-15);
        for j in 0..3 {
            let mean = rows.iter().map(|&i| d.observed(i, j)).sum::<f64>() / rows.len() as f64;
            assert!((m.mu[k][j] - mean).abs() < 1e-12);
            let var = rows.iter().map(|&i| (d.observed(i, j) - mean).powi(2)).sum::<f64>() / rows.len() as f64;
            let diag = m.loadings[k][(j, 0)].powi(2) + m.psi[k][j];
            assert!((diag - var).abs() < 1e-12);
        }
    }
}

#[test]
fn degenerate_and_invalid_starts() {
    let (d, _) = two_clouds(5);
    let mut labels = vec![0; 60];
    labels[0] = 1;
    assert!(params_from_labels(&d, &labels, 2, 1, &InitConfig::default()).is_err());
    assert!(params_from_labels(&d, &vec![0; 60], 1, 3, &InitConfig::default()).is_err());
    let bad = InitConfig {
        omega0: -0.5,
        ..InitConfig::default()
    };
    assert!(init_params(&d, 2, 1, &bad, &mut common::rng(0)).is_err());
}

#[test]
fn singular_scatter_gets_a_ridge() {
    // Points on a line: rank-one scatter.
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64, 1.0]).collect();
    let d = DataMatrix::from_rows(&rows).unwrap();
    let m = params_from_labels(&d, &[0; 10], 1, 1, &InitConfig::default()).unwrap();
    assert!(m.psi[0].iter().all(|&v| v >= MIN_INIT_PSI));
    m.validate().unwrap();
}
