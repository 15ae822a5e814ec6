use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pancake_bench::fixture_instance;
use pancake_core::design::{find_uniform_design, SearchOptions};
use pancake_core::pancakes::{sample_null, Sampler};
use pancake_core::quadrature::GaussHermiteRule;
use pancake_core::tensor::empirical_tensors;
use pancake_core::tester::{check_order, worst_case_thresholds, GaussianTensors, TestConfig};

fn gauss_hermite(c: &mut Criterion) {
    let mut g = c.benchmark_group("gauss_hermite_rule");
    for t in [10, 40, 120] {
        g.bench_with_input(BenchmarkId::from_parameter(t), &t, |b, &t| {
            b.iter(|| GaussHermiteRule::new(black_box(t)).unwrap())
        });
    }
    g.finish();
}

fn tensors(c: &mut Criterion) {
    let mut g = c.benchmark_group("empirical_tensors");
    g.sample_size(10);
    for (d, order) in [(8, 5), (16, 4)] {
        let x = sample_null(d, 20_000, 1);
        g.bench_with_input(BenchmarkId::new(format!("d{d}"), order), &order, |b, &order| {
            b.iter(|| empirical_tensors(black_box(x.view()), order).unwrap())
        });
    }
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let inst = fixture_instance(8);
    c.bench_function("instance_sample_20k_d8", |b| {
        b.iter(|| inst.sample(black_box(20_000), 3))
    });
}

fn design_search(c: &mut Criterion) {
    let mut g = c.benchmark_group("find_uniform_design");
    g.sample_size(10);
    for (k, m) in [(6, 5), (16, 5), (32, 7)] {
        g.bench_function(format!("k{k}_m{m}"), |b| {
            b.iter(|| find_uniform_design(black_box(k), m, &SearchOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn tester_check(c: &mut Criterion) {
    let d = 8;
    let inst = fixture_instance(d);
    let (theta, norm) = worst_case_thresholds(d, 4, 20_000, 0.9, 1.0);
    let cfg = TestConfig {
        order_budget: 4,
        tau: 0.05,
        n: 20_000,
        entry_thresholds: theta,
        norm_threshold: norm * 10.0,
        min_weight: 0.5,
        repetitions: 7,
        seed: 0,
    };
    let gaussian = GaussianTensors::new(d, 5).unwrap();
    let mut g = c.benchmark_group("check_order");
    g.sample_size(10);
    g.bench_function("order4_n20k_d8", |b| {
        b.iter(|| check_order(&inst, 4, &cfg, &gaussian, black_box(5)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, gauss_hermite, tensors, sampling, design_search, tester_check);
criterion_main!(benches);
