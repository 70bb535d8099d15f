use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use qdot_core::binning::{make_bins, sorted_bin_init_with, SortMethod};
use qdot_core::float_bits::exponent_preprocess;
use qdot_core::harness::{generate, DistSpec, Family};
use qdot_core::kernel::{compute, naive_dot};
use qdot_core::{qdot, reference_dot, select_parameters, SplitMode, Strategy, ToleranceConfig};

fn vectors(n: usize) -> (Vec<f64>, Vec<f64>) {
    generate(&DistSpec {
        family: Family::UniformExp,
        t: 50.0,
        n,
        seed: 1,
    })
    .expect("valid spec")
}

fn dot_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("dot");
    for n in [1_000, 100_000] {
        let (x, y) = vectors(n);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("naive", n), &n, |b, _| {
            b.iter(|| naive_dot(black_box(&x), black_box(&y)))
        });
        group.bench_with_input(BenchmarkId::new("reference", n), &n, |b, _| {
            b.iter(|| reference_dot(black_box(&x), black_box(&y)).unwrap())
        });
        for eps in [1e-14, 1e-8, 1e-3] {
            let cfg = ToleranceConfig::new(eps, SplitMode::PerBin).unwrap();
            group.bench_with_input(
                BenchmarkId::new(format!("qdot/eps={eps:e}"), n),
                &n,
                |b, _| b.iter(|| qdot(black_box(&x), black_box(&y), cfg, Strategy::Exact).unwrap()),
            );
        }
    }
    group.finish();
}

fn phases(c: &mut Criterion) {
    let n = 100_000;
    let (x, y) = vectors(n);
    let cfg = ToleranceConfig::new(1e-8, SplitMode::PerBin).unwrap();
    let mut group = c.benchmark_group("phases");
    group.throughput(Throughput::Elements(n as u64));
    group.bench_function("select", |b| {
        b.iter(|| select_parameters(black_box(&x), black_box(&y), cfg, Strategy::Exact).unwrap())
    });
    let params = select_parameters(&x, &y, cfg, Strategy::Exact).unwrap();
    group.bench_function("compute", |b| {
        b.iter(|| compute(black_box(&x), black_box(&y), &params).unwrap())
    });

    let summary = exponent_preprocess(&x, &y).unwrap();
    for method in [SortMethod::Counting, SortMethod::Comparison] {
        group.bench_function(format!("sort/{method:?}"), |b| {
            b.iter(|| sorted_bin_init_with(black_box(&summary), method))
        });
    }
    let init = sorted_bin_init_with(&summary, SortMethod::Counting);
    for strategy in [Strategy::Exact, Strategy::Ranged(4), Strategy::Split(6)] {
        group.bench_function(format!("bins/{strategy}"), |b| {
            b.iter(|| make_bins(black_box(&summary), &init, strategy).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, dot_kernels, phases);
criterion_main!(benches);
