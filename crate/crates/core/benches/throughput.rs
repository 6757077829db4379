//! Replicate-batch throughput: the deterministic chunked reduction on the
//! rayon pool against its sequential twin, for the walk simulator and the
//! small-ball engine. Both backends produce identical results; the bench
//! measures the speedup only.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use erw_core::batch::{reduce_chunks, reduce_chunks_seq};
use erw_core::model::WalkConfig;
use erw_core::stats::{
    small_ball_log_prob, MomentAccumulator, SmallBallProcess, SmallBallSpec, SupFunctional,
};
use erw_core::walkers::simulate_walk_replicate;

fn walk_batch(c: &mut Criterion) {
    let cfg = WalkConfig::simple(1, 0.6, 2_000, 42, 512);
    let map = |range: std::ops::Range<u64>| {
        let mut acc = MomentAccumulator::new(1);
        for rep in range {
            let p = simulate_walk_replicate(&cfg, rep).unwrap();
            acc.accumulate(&[p.s[0] as f64 / (cfg.horizon as f64).sqrt()]);
        }
        acc
    };
    let mut group = c.benchmark_group("walk_batch");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("parallel", cfg.replicates), |b| {
        b.iter(|| reduce_chunks(cfg.replicates, 64, map, |a, x| MomentAccumulator::merge(a, &x)))
    });
    group.bench_function(BenchmarkId::new("sequential", cfg.replicates), |b| {
        b.iter(|| {
            reduce_chunks_seq(cfg.replicates, 64, map, |a, x| MomentAccumulator::merge(a, &x))
        })
    });
    group.finish();
}

fn small_ball(c: &mut Criterion) {
    let spec = SmallBallSpec {
        process: SmallBallProcess::Mixture {
            rho1: 0.0,
            rho2: 0.2,
            sigma1: 0.5f64.sqrt(),
            sigma2: 0.5f64.sqrt(),
        },
        functional: SupFunctional::SupNorm,
        d: 1,
        grid: 1 << 12,
    };
    let mut group = c.benchmark_group("small_ball");
    group.sample_size(10);
    // the engine is chunk-parallel internally; compare pool sizes
    group.bench_function("pool_default", |b| {
        b.iter(|| small_ball_log_prob(&spec, 0.6, 20_000, 7))
    });
    group.bench_function("pool_1", |b| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        b.iter(|| pool.install(|| small_ball_log_prob(&spec, 0.6, 20_000, 7)))
    });
    group.finish();
}

criterion_group!(benches, walk_batch, small_ball);
criterion_main!(benches);
