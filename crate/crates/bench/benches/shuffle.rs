//! Cost of decorrelating a freshly filled pool: no shuffle, the built-in
//! round-robin pseudo shuffle, a full random shuffle, and an index-mapping
//! gather (random permutation precomputed, applied per pool).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use gridwalk::sampler::{fill_pool_parallel, Sampler};
use gridwalk_bench::{bench_graph, bench_sampler_config};
use rand::seq::SliceRandom;
use rand::SeedableRng;

const POOL: usize = 200_000;

fn bench_shuffles(c: &mut Criterion) {
    let graph = bench_graph();
    let mut group = c.benchmark_group("pool_fill");
    group.throughput(Throughput::Elements(POOL as u64));
    group.sample_size(20);

    for (name, pseudo) in [("no_shuffle", false), ("pseudo_shuffle", true)] {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            let mut sampler = Sampler::new(&graph, bench_sampler_config(POOL, pseudo)).unwrap();
            b.iter(|| black_box(sampler.fill_pool().len()));
        });
    }

    group.finish();

    // baseline decorrelation passes over an already-filled pool
    let raw = fill_pool_parallel(&graph, &bench_sampler_config(POOL, false)).unwrap();
    let raw = raw.samples().to_vec();

    let mut group = c.benchmark_group("shuffle_pass");
    group.throughput(Throughput::Elements(POOL as u64));
    group.sample_size(20);

    group.bench_function(BenchmarkId::from_parameter("pseudo"), |b| {
        b.iter(|| black_box(gridwalk::sampler::pseudo_shuffle(&raw, 2).len()));
    });

    group.bench_function(BenchmarkId::from_parameter("random"), |b| {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        b.iter_batched(
            || raw.clone(),
            |mut pool| {
                pool.shuffle(&mut rng);
                black_box(pool.len())
            },
            criterion::BatchSize::LargeInput,
        );
    });

    group.bench_function(BenchmarkId::from_parameter("index_mapping"), |b| {
        // permutation precomputed once; per pool, only the gather remains
        let mut rng = rand::rngs::StdRng::seed_from_u64(8);
        let mut perm: Vec<u32> = (0..POOL as u32).collect();
        perm.shuffle(&mut rng);
        b.iter(|| {
            let out: Vec<_> = perm.iter().map(|&k| raw[k as usize]).collect();
            black_box(out.len())
        });
    });

    group.finish();
}

criterion_group!(benches, bench_shuffles);
criterion_main!(benches);
