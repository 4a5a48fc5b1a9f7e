use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use ottolab_core::bridge::{entropic_interpolation, epsilon_sweep, sinkhorn, SinkhornOptions};
use ottolab_core::interp::dual_check;
use ottolab_core::measure::GridMeasure;
use ottolab_core::par::Exec;
use ottolab_core::potential::PotentialSpec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bench_sweep(c: &mut Criterion) {
    let mu = GridMeasure::von_mises(128, 0.3, 12.0).unwrap();
    let nu = GridMeasure::von_mises(128, 0.5, 12.0).unwrap();
    let eps = [0.4, 0.3, 0.2, 0.15, 0.1, 0.08, 0.06, 0.05];
    let mut g = c.benchmark_group("epsilon_sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| epsilon_sweep(black_box(&mu), &nu, &eps, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_interpolation(c: &mut Criterion) {
    let mu = GridMeasure::von_mises(256, 0.3, 12.0).unwrap();
    let nu = GridMeasure::von_mises(256, 0.5, 12.0).unwrap();
    let pots = sinkhorn(&mu, &nu, 0.1, SinkhornOptions::default()).unwrap();
    let mut g = c.benchmark_group("entropic_interpolation");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| entropic_interpolation(black_box(&pots), 400, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_dual(c: &mut Criterion) {
    let f = PotentialSpec::quadratic(1, 1.0).unwrap();
    let slopes: Vec<Vec<f64>> = (-16..=16).map(|i| vec![i as f64 * 0.25]).collect();
    let mut g = c.benchmark_group("dual_slopes");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| dual_check(&f, &[0.8], &[-0.6], 1.0, 256, black_box(&slopes), exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_sweep, bench_interpolation, bench_dual);
criterion_main!(benches);
