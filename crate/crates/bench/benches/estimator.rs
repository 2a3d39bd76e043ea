use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use rotmix::{cost_matrix, estep_entropic_cost, estep_hard, estep_quadratic, fit, FitConfig, PenaltyKind};
use rotmix_bench::{gaussian_fixture, poisson_fixture};

fn plan_updates(c: &mut Criterion) {
    let mut group = c.benchmark_group("plan_update");
    for &(n, k) in &[(1_000usize, 4usize), (20_000, 8)] {
        let (model, data) = gaussian_fixture(n, k, 4, 1);
        let gamma = cost_matrix(&model, &data).unwrap();
        let label = format!("n{n}_k{k}");
        group.bench_with_input(BenchmarkId::new("cost_matrix", &label), &(), |b, _| {
            b.iter(|| cost_matrix(black_box(&model), black_box(&data)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("hard", &label), &(), |b, _| {
            b.iter(|| estep_hard(black_box(&gamma), data.upsilon()))
        });
        group.bench_with_input(BenchmarkId::new("entropic", &label), &(), |b, _| {
            b.iter(|| estep_entropic_cost(black_box(&gamma), data.upsilon(), 1.0))
        });
        group.bench_with_input(BenchmarkId::new("quadratic", &label), &(), |b, _| {
            b.iter(|| estep_quadratic(black_box(&gamma), data.upsilon(), 1.0).unwrap())
        });
    }
    group.finish();
}

fn fits(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    let (_, gaussian) = gaussian_fixture(5_000, 4, 2, 2);
    let (_, poisson) = poisson_fixture(5_000, 3, 3);
    for (name, lambda, penalty) in [
        ("hard", 0.0, PenaltyKind::Entropic),
        ("em", 1.0, PenaltyKind::Entropic),
        ("quadratic", 1.0, PenaltyKind::Quadratic),
    ] {
        let config = FitConfig {
            lambda,
            penalty,
            max_iters: 100,
            ..FitConfig::default()
        };
        group.bench_function(BenchmarkId::new("gaussian_n5000_k4", name), |b| {
            b.iter(|| fit(black_box(&gaussian), 4, &config).unwrap())
        });
        group.bench_function(BenchmarkId::new("poisson_n5000_k3", name), |b| {
            b.iter(|| fit(black_box(&poisson), 3, &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, plan_updates, fits);
criterion_main!(benches);
