//! Parallel versus sequential sweeps over the same grid.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use omsim::channel::{sweep, sweep_sequential, AccessPolicy, GridSpec, SweepConfig};

fn config(policy: AccessPolicy) -> SweepConfig {
    SweepConfig {
        meters: 2_000,
        ..SweepConfig::new(policy, GridSpec::new(0.1, 1.5, 8).unwrap(), 1, 20_000)
    }
}

fn sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for policy in AccessPolicy::ALL {
        let cfg = config(policy);
        group.bench_with_input(
            BenchmarkId::new("parallel", policy.name()),
            &cfg,
            |b, cfg| b.iter(|| sweep(cfg).unwrap()),
        );
        group.bench_with_input(
            BenchmarkId::new("sequential", policy.name()),
            &cfg,
            |b, cfg| b.iter(|| sweep_sequential(cfg).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
