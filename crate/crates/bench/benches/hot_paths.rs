use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use polarlens_bench::{entropy_values, random_graph, uniform};
use polarlens_core::entropy::find_minimum_interval;
use polarlens_core::graph::k_core;
use polarlens_core::stats::{dip_statistic, hartigan_dip, mann_whitney_u};

fn kcore(c: &mut Criterion) {
    let mut group = c.benchmark_group("k_core");
    for nodes in [1_000, 10_000] {
        let g = random_graph(nodes, 3, 1);
        group.bench_with_input(BenchmarkId::from_parameter(nodes), &g, |b, g| {
            b.iter(|| k_core(black_box(g), 2).unwrap())
        });
    }
    group.finish();
}

fn minimum_interval(c: &mut Criterion) {
    let mut group = c.benchmark_group("find_minimum_interval");
    for n in [1_000, 10_000] {
        let data = entropy_values(n, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, d| {
            b.iter(|| find_minimum_interval(black_box(d)).unwrap())
        });
    }
    group.finish();
}

fn dip(c: &mut Criterion) {
    let data = uniform(500, 3);
    c.bench_function("dip_statistic/500", |b| b.iter(|| dip_statistic(black_box(&data)).unwrap()));
    let mut group = c.benchmark_group("hartigan_dip");
    group.sample_size(10);
    // distinct seeds per iteration so the null cache does not hide the work
    let mut seed = 0u64;
    group.bench_function("500x1000", |b| {
        b.iter(|| {
            seed += 1;
            hartigan_dip(black_box(&data), 1000, seed).unwrap()
        })
    });
    group.finish();
}

fn mwu(c: &mut Criterion) {
    let x = uniform(5_000, 4);
    let y = uniform(5_000, 5);
    c.bench_function("mann_whitney_u/5000", |b| {
        b.iter(|| mann_whitney_u(black_box(&x), black_box(&y), 1).unwrap())
    });
}

criterion_group!(benches, kcore, minimum_interval, dip, mwu);
criterion_main!(benches);
