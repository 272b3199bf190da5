//! Shared fixtures for the benchmark targets.

use gridwalk::{Graph, SamplerConfig};

pub fn bench_graph() -> Graph {
    gridwalk::synth::gnm(20_000, 200_000, 42).expect("bench graph")
}

pub fn bench_sampler_config(pool_capacity: usize, pseudo_shuffle: bool) -> SamplerConfig {
    SamplerConfig {
        pool_capacity,
        pseudo_shuffle,
        seed: 42,
        ..Default::default()
    }
}
