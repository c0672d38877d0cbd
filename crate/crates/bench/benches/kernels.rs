use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use uict_core::continuum::{bessel_i1_scaled, solve_feynman_kac};
use uict_core::processes::{chain_step, chain_step_direct};
use uict_core::trees::sample_conditioned;
use uict_core::{OffspringDistribution, PdeGrid, Scheme, StreamSeed};

fn chain(c: &mut Criterion) {
    let d = OffspringDistribution::geometric();
    let mut group = c.benchmark_group("chain_step");
    for m in [10u64, 1_000, 100_000] {
        let mut rng = StreamSeed::new(1).rng();
        group.bench_with_input(BenchmarkId::new("negative_binomial", m), &m, |b, &m| {
            b.iter(|| chain_step(&d, black_box(m), &mut rng))
        });
        if m <= 1_000 {
            let mut rng = StreamSeed::new(1).rng();
            group.bench_with_input(BenchmarkId::new("direct", m), &m, |b, &m| {
                b.iter(|| chain_step_direct(&d, black_box(m), &mut rng))
            });
        }
    }
    group.finish();
}

fn conditioned_tree(c: &mut Criterion) {
    let d = OffspringDistribution::geometric();
    let mut rng = StreamSeed::new(2).rng();
    c.bench_function("sample_conditioned h=50", |b| {
        b.iter(|| sample_conditioned(&d, black_box(50), 1, &mut rng))
    });
}

fn bessel(c: &mut Criterion) {
    c.bench_function("bessel_i1_scaled", |b| {
        b.iter(|| {
            let mut s = 0.0;
            for i in 0..100 {
                s += bessel_i1_scaled(black_box(i as f64 * 0.37));
            }
            s
        })
    });
}

fn pde(c: &mut Criterion) {
    let mut group = c.benchmark_group("feynman_kac");
    group.sample_size(10);
    for scheme in [Scheme::Implicit, Scheme::CrankNicolson] {
        let grid = PdeGrid {
            n_l: 600,
            n_tau: 200,
            scheme,
            ..PdeGrid::default()
        };
        group.bench_function(format!("{scheme:?}"), |b| {
            b.iter(|| solve_feynman_kac(1.0, 0.5, black_box(&grid), 1.0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, chain, conditioned_tree, bessel, pde);
criterion_main!(benches);
