//! Parallel vs sequential replication throughput on the reference models.
//!
//! `simulate` fans replications out over rayon (with the default `parallel`
//! feature); `simulate_sequential` is the single-threaded fallback. Both
//! produce bit-identical estimates, so this suite measures the speedup only.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use synq::sim::{simulate, simulate_sequential, SimConfig};
use synq::test_models::{m1, m2};
use synq::verify::default_alpha_grid;

fn bench_replications(c: &mut Criterion) {
    let mut group = c.benchmark_group("replications");
    group.sample_size(10);
    for (name, model) in [("m1", m1()), ("m2", m2())] {
        let cfg = SimConfig::new(500.0, 64, 42).with_alpha_grid(default_alpha_grid(model.n()));
        group.bench_with_input(BenchmarkId::new("parallel", name), &cfg, |b, cfg| {
            b.iter(|| simulate(&model, cfg).unwrap());
        });
        group.bench_with_input(BenchmarkId::new("sequential", name), &cfg, |b, cfg| {
            b.iter(|| simulate_sequential(&model, cfg).unwrap());
        });
    }
    group.finish();
}

fn bench_transform_grid(c: &mut Criterion) {
    let model = m1();
    c.bench_function("lst_w_20x20_grid", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for i in 0..20 {
                for j in 0..20 {
                    let a = [5.0 * i as f64 / 19.0, 5.0 * j as f64 / 19.0];
                    acc += synq::steady_state::lst_w(&model, &a).unwrap();
                }
            }
            acc
        });
    });
}

criterion_group!(benches, bench_replications, bench_transform_grid);
criterion_main!(benches);
