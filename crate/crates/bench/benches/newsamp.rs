use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use newsamp_bench::{probe, spiked_logistic};
use newsamp_core::linalg::{build_scaling_matrix, sym_eigen};
use newsamp_core::newsamp;
use newsamp_core::{ConvexSet, DVector, NewSampConfig, SampleScheme};

fn hessian(c: &mut Criterion) {
    let obj = spiked_logistic(10_000, 50, 0);
    let theta = probe(50);
    let mut g = c.benchmark_group("hessian");
    for size in [200usize, 500, 2000] {
        let sample = SampleScheme::independent(size, 1).sample(0, obj.n()).unwrap();
        g.bench_with_input(BenchmarkId::new("subsampled", size), &sample, |b, s| {
            b.iter(|| obj.subsampled_hessian(black_box(&theta), s).unwrap())
        });
    }
    g.bench_function("full", |b| b.iter(|| obj.hessian(black_box(&theta)).unwrap()));
    g.finish();
}

fn eigen(c: &mut Criterion) {
    let mut g = c.benchmark_group("eigen");
    for p in [20usize, 50, 100] {
        let obj = spiked_logistic(2_000, p, 0);
        let h = obj.hessian(&probe(p)).unwrap();
        g.bench_with_input(BenchmarkId::new("full", p), &h, |b, h| b.iter(|| sym_eigen(black_box(h))));
        g.bench_with_input(BenchmarkId::new("scaling-matrix", p), &h, |b, h| {
            b.iter(|| build_scaling_matrix(black_box(h), 3).unwrap())
        });
    }
    g.finish();
}

fn iteration(c: &mut Criterion) {
    let obj = spiked_logistic(10_000, 50, 0);
    let mut g = c.benchmark_group("newsamp");
    g.sample_size(20);
    for size in [500usize, 2000] {
        let cfg = NewSampConfig::new(3, SampleScheme::independent(size, 1), DVector::zeros(50)).with_max_iters(1);
        g.bench_with_input(BenchmarkId::new("one-iteration", size), &cfg, |b, cfg| {
            b.iter(|| newsamp::run(&obj, cfg, &ConvexSet::Unconstrained, None).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, hessian, eigen, iteration);
criterion_main!(benches);
