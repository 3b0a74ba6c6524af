//! Criterion benchmarks for the hot kernels: map application, Benettin
//! FTLE accumulation, and hyperbolic-time detection.

use criterion::{black_box, criterion_group, criterion_main, Criterion, Throughput};
use meclab_core::{
    contraction_series, detect_hyperbolic_times, ftle, AnosovSpec, ManeDASpec, MapSpec,
    TorusPoint,
};

fn maps() -> (MapSpec, MapSpec) {
    let base = AnosovSpec::default_example();
    let mane = MapSpec::Mane(ManeDASpec::new(base.clone(), 0.05).unwrap());
    (MapSpec::Anosov(base), mane)
}

fn bench_apply(c: &mut Criterion) {
    let (anosov, mane) = maps();
    let x = TorusPoint::new(0.3, 0.7, 0.1);
    let mut g = c.benchmark_group("apply");
    g.throughput(Throughput::Elements(1));
    for (name, map) in [("anosov", &anosov), ("mane", &mane)] {
        g.bench_function(name, |b| {
            let mut y = x;
            b.iter(|| {
                y = map.apply(black_box(&y));
                y
            })
        });
    }
    g.finish();
}

fn bench_ftle(c: &mut Criterion) {
    let (anosov, mane) = maps();
    let x = TorusPoint::new(0.3, 0.7, 0.1);
    let mut g = c.benchmark_group("ftle_n10000");
    g.sample_size(20);
    for (name, map) in [("anosov", &anosov), ("mane", &mane)] {
        g.bench_function(name, |b| {
            b.iter(|| ftle(map, black_box(&x), 10_000, 100).unwrap())
        });
    }
    g.finish();
}

fn bench_hyperbolic_times(c: &mut Criterion) {
    let (_, mane) = maps();
    let x = TorusPoint::new(0.3, 0.7, 0.1);
    let series = contraction_series(&mane, &x, 100_000, 100).unwrap();
    let mut g = c.benchmark_group("detect_hyperbolic_times");
    g.throughput(Throughput::Elements(series.values.len() as u64));
    g.bench_function("L100000", |b| {
        b.iter(|| detect_hyperbolic_times(black_box(&series.values), 0.4).unwrap())
    });
    g.finish();
}

criterion_group!(benches, bench_apply, bench_ftle, bench_hyperbolic_times);
criterion_main!(benches);
