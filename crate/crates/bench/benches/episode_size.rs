//! Training throughput as a function of episode size: smaller episodes mean
//! tighter synchronization, larger ones fewer barriers.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use gridwalk::partition::{redistribute, zigzag_partition};
use gridwalk::sampler::fill_pool_parallel;
use gridwalk::scheduler::{GridTrainer, SchedulerOptions};
use gridwalk::trainer::{EmbeddingStore, TrainConfig};
use gridwalk::SamplePool;
use gridwalk_bench::{bench_graph, bench_sampler_config};

const POOL: usize = 200_000;

fn bench_episode_sizes(c: &mut Criterion) {
    let graph = bench_graph();
    let parts = 4;
    let partitioning = zigzag_partition(graph.degrees(), parts).unwrap();
    let pool = fill_pool_parallel(&graph, &bench_sampler_config(POOL, true)).unwrap();
    let samples = pool.samples().to_vec();

    let mut group = c.benchmark_group("episode_size");
    group.throughput(Throughput::Elements(POOL as u64));
    group.sample_size(10);

    for episode_size in [12_500usize, 25_000, 50_000, 100_000, 200_000] {
        let cfg = TrainConfig {
            dim: 128,
            epochs: 1,
            episode_size,
            ..Default::default()
        };
        group.bench_with_input(
            BenchmarkId::from_parameter(episode_size),
            &episode_size,
            |b, _| {
                b.iter_batched(
                    || {
                        let mut pool = SamplePool::from_samples(samples.clone());
                        redistribute(&mut pool, &partitioning, &partitioning);
                        let store = EmbeddingStore::init(&partitioning, &partitioning, cfg.dim, 11);
                        let trainer = GridTrainer::new(
                            &graph,
                            &partitioning,
                            &partitioning,
                            &cfg,
                            SchedulerOptions {
                                workers: 2,
                                seed: 11,
                                ..Default::default()
                            },
                        )
                        .unwrap();
                        (pool, store, trainer)
                    },
                    |(mut pool, mut store, mut trainer)| {
                        let episodes = trainer.train_pool(&mut pool, &mut store).unwrap();
                        black_box(episodes.len())
                    },
                    criterion::BatchSize::LargeInput,
                );
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_episode_sizes);
criterion_main!(benches);
