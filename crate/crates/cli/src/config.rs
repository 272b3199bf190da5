//! Flat run configuration: serializable to a key = value TOML file, with
//! CLI flags overriding file values.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dim: usize,
    pub epochs: usize,
    pub walk_length: usize,
    pub aug_distance: usize,
    pub negatives: usize,
    pub neg_scale: f32,
    pub lr: f32,
    /// 0 selects the 200 * node_count default.
    pub episode_size: usize,
    /// 0 sizes pools to one episode.
    pub pool_size: usize,
    pub partitions: usize,
    pub workers: usize,
    pub samplers: usize,
    pub seed: u64,
    pub pinned_context: bool,
    pub normalize_output: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: 128,
            epochs: 2000,
            walk_length: 40,
            aug_distance: 2,
            negatives: 1,
            neg_scale: 5.0,
            lr: 0.025,
            episode_size: 0,
            pool_size: 0,
            partitions: 1,
            workers: 1,
            samplers: 1,
            seed: 1,
            pinned_context: false,
            normalize_output: false,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn serialize(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn sampler_config(&self) -> gridwalk::SamplerConfig {
        gridwalk::SamplerConfig {
            walk_length: self.walk_length,
            aug_distance: self.aug_distance,
            pool_capacity: self.pool_size,
            threads: self.samplers,
            seed: self.seed,
            pseudo_shuffle: true,
        }
    }

    pub fn train_config(&self) -> gridwalk::TrainConfig {
        gridwalk::TrainConfig {
            dim: self.dim,
            negatives: self.negatives,
            negative_scale: self.neg_scale,
            lr_initial: self.lr,
            lr_floor_ratio: 1e-4,
            epochs: self.epochs,
            episode_size: self.episode_size,
            stream_chunk: 0,
        }
    }
}
