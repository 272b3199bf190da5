//! Node-embedding training engine.
//!
//! The pipeline: random walks over a weighted undirected [`graph::Graph`]
//! generate positive (source, target) pairs in a fixed-capacity sample pool
//! ([`sampler`]), the pool is bucketed into an n x n grid of blocks by a
//! degree-balanced node partition ([`partition`]), and parallel workers run
//! skip-gram negative-sampling updates on orthogonal blocks ([`trainer`],
//! [`scheduler`]) while the next pool fills concurrently ([`pipeline`]).
//! Trained embeddings are scored with node classification and link
//! prediction ([`eval`]).

pub mod alias;
pub mod error;
pub mod eval;
pub mod graph;
pub mod partition;
pub mod pipeline;
pub mod pool;
pub mod sampler;
pub mod scheduler;
pub mod seeds;
pub mod synth;
pub mod trainer;

pub use alias::AliasTable;
pub use error::Error;
pub use graph::Graph;
pub use partition::Partitioning;
pub use pool::{EdgeSample, PoolState, SamplePool};
pub use sampler::SamplerConfig;
pub use trainer::{EmbeddingStore, TrainConfig};

pub type NodeId = u32;
