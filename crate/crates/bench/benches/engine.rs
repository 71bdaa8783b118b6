use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mghfa::{
    apply_mar, estep_cycle1, estep_cycle2, gig_moments, init_params, log_bessel_k, observed_loglik, simulate, table1_model,
    DataMatrix, FitConfig, GigParams, InitConfig, MarPattern, MarSpec, SimSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn table1_data(n_per_g: usize, rate: f64) -> DataMatrix {
    let spec = SimSpec::new(table1_model(), vec![n_per_g; 3], 1).unwrap();
    let d = simulate::simulate_seeded(&spec).unwrap().0;
    let mar = MarSpec::new(MarPattern::One, rate, d.nrows()).unwrap();
    apply_mar(&d, &mar, &mut ChaCha8Rng::seed_from_u64(2)).unwrap()
}

fn special_functions(c: &mut Criterion) {
    let mut g = c.benchmark_group("bessel");
    for (order, x) in [(0.5, 1.0), (2.3, 0.05), (-3.7, 40.0), (25.0, 3.0)] {
        g.bench_with_input(BenchmarkId::new("log_k", format!("{order}_{x}")), &(order, x), |b, &(v, x)| {
            b.iter(|| log_bessel_k(black_box(v), black_box(x)).unwrap())
        });
    }
    g.finish();
    let p = GigParams::new(1.5, 2.0, 0.7).unwrap();
    c.bench_function("gig_moments", |b| b.iter(|| gig_moments(black_box(&p)).unwrap()));
}

fn estep(c: &mut Criterion) {
    let d = table1_data(200, 0.1);
    let m = init_params(&d, 3, 2, &InitConfig::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let mut g = c.benchmark_group("estep_600x6");
    g.sample_size(20);
    g.bench_function("cycle1", |b| b.iter(|| estep_cycle1(&d, &m).unwrap()));
    g.bench_function("cycle2", |b| b.iter(|| estep_cycle2(&d, &m).unwrap()));
    g.bench_function("observed_loglik", |b| b.iter(|| observed_loglik(&d, &m).unwrap()));
    g.finish();
}

fn iterations(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit_10_iterations");
    g.sample_size(10);
    for n_per_g in [50, 200] {
        let d = table1_data(n_per_g, 0.1);
        let mut cfg = FitConfig::new(3, 2).with_seed(4);
        cfg.max_iter = 10;
        g.bench_with_input(BenchmarkId::from_parameter(3 * n_per_g), &d, |b, d| {
            b.iter(|| mghfa::fit(d, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, special_functions, estep, iterations);
criterion_main!(benches);
