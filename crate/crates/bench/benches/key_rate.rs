use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nodecoy::finitesize::{finite_key_length, FiniteScenario, SecurityParams};
use nodecoy::{asymptotic_rate, build_gmap, expected_frequencies, ProtocolKind, SolverConfig};
use nodecoy_bench::fixture;

fn models(c: &mut Criterion) {
    let mut group = c.benchmark_group("model");
    for kind in ProtocolKind::ALL {
        let fx = fixture(kind, 0.1, 10.0);
        group.bench_with_input(BenchmarkId::new("gmap", kind), &fx.proto, |b, p| {
            b.iter(|| build_gmap(p).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("frequencies", kind), &fx, |b, fx| {
            b.iter(|| expected_frequencies(&fx.source, &fx.channel, &fx.proto).unwrap())
        });
    }
    group.finish();
}

fn asymptotic(c: &mut Criterion) {
    let mut group = c.benchmark_group("asymptotic_rate");
    group.sample_size(10);
    let cfg = SolverConfig::default();
    for kind in ProtocolKind::ALL {
        let fx = fixture(kind, 0.1, 10.0);
        group.bench_with_input(BenchmarkId::from_parameter(kind), &fx, |b, fx| {
            b.iter(|| asymptotic_rate(&fx.g, &fx.constraints, fx.leakage, 1.0, &cfg).unwrap())
        });
    }
    group.finish();
}

fn finite(c: &mut Criterion) {
    let mut group = c.benchmark_group("finite_key_length");
    group.sample_size(10);
    let cfg = SolverConfig::default();
    let fx = fixture(ProtocolKind::Bb84, 0.4, 5.0);
    let f = expected_frequencies(&fx.source, &fx.channel, &fx.proto).unwrap();
    let fs = FiniteScenario::new(1e9, 0.85, fx.source.clone(), f).unwrap();
    group.bench_function("BB84_1e9", |b| {
        b.iter(|| finite_key_length(&fs, &SecurityParams::default(), &fx.g, &fx.proto, 1.2, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, models, asymptotic, finite);
criterion_main!(benches);
