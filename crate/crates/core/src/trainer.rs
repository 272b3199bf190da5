//! Skip-gram negative-sampling updates on one grid block.
//!
//! A block (i, j) trains positive pairs whose sources live in vertex part i
//! and targets in context part j; negatives are drawn from the context
//! part's own noise distribution (degree^0.75 restricted to its members),
//! so a worker never needs rows outside its two shards.

use rand::Rng;

use crate::alias::AliasTable;
use crate::error::Result;
use crate::partition::Partitioning;
use crate::pool::EdgeSample;
use crate::seeds;
use crate::NodeId;

const INIT_STREAM_TAG: u64 = 0x1e;

/// Logits are clamped here before the sigmoid; beyond it the gradient is
/// treated as saturated.
pub const MAX_LOGIT: f32 = 10.0;

/// Exponent of the degree-based negative-sampling noise distribution.
pub const NOISE_POWER: f64 = 0.75;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Embedding dimension.
    pub dim: usize,
    /// Negative samples per positive sample.
    pub negatives: usize,
    /// Gradient scale applied to negative updates only.
    pub negative_scale: f32,
    pub lr_initial: f32,
    /// The learning rate never decays below `lr_initial * lr_floor_ratio`.
    pub lr_floor_ratio: f32,
    pub epochs: usize,
    /// Positive samples per episode; 0 selects the 200 * node_count default.
    pub episode_size: usize,
    /// Samples handed to a worker per streaming step; 0 streams the whole
    /// block at once. Functionally a no-op, kept as a transfer-granularity
    /// contract.
    pub stream_chunk: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 128,
            negatives: 1,
            negative_scale: 5.0,
            lr_initial: 0.025,
            lr_floor_ratio: 1e-4,
            epochs: 2000,
            episode_size: 0,
            stream_chunk: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if self.dim == 0 {
            return Err(Error::config("embedding dimension must be positive"));
        }
        if self.negatives == 0 {
            return Err(Error::config("need at least one negative per positive"));
        }
        if self.lr_initial <= 0.0 || self.lr_floor_ratio <= 0.0 {
            return Err(Error::config("learning rate and floor must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::config("need at least one epoch"));
        }
        Ok(())
    }
}

/// Linear decay from `initial` down to `initial * floor_ratio` over `total`
/// positive samples.
#[derive(Debug, Clone, Copy)]
pub struct LrSchedule {
    pub initial: f32,
    pub floor_ratio: f32,
    pub total: u64,
}

impl LrSchedule {
    /// Learning rate after `samples_done` positives; saturates at the floor
    /// once the budget is exhausted.
    pub fn at(&self, samples_done: u64) -> f32 {
        let remaining = 1.0 - samples_done as f64 / self.total as f64;
        (self.initial as f64 * remaining.max(self.floor_ratio as f64)) as f32
    }
}

/// Rows of one partition, stored dense and owned by exactly one worker
/// while an episode trains on it.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Shard {
    dim: usize,
    rows: Vec<f32>,
}

impl Shard {
    fn zeros(rows: usize, dim: usize) -> Self {
        Shard {
            dim,
            rows: vec![0.0; rows * dim],
        }
    }

    pub fn row(&self, local: usize) -> &[f32] {
        &self.rows[local * self.dim..(local + 1) * self.dim]
    }

    pub fn row_mut(&mut self, local: usize) -> &mut [f32] {
        &mut self.rows[local * self.dim..(local + 1) * self.dim]
    }

    pub fn row_count(&self) -> usize {
        self.rows.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.rows
    }
}

/// Vertex and context matrices, row-partitioned into one shard per part.
///
/// Between episodes the store owns every shard; during an offset step the
/// scheduler moves each scheduled shard into exactly one worker and back.
#[derive(Clone)]
pub struct EmbeddingStore {
    dim: usize,
    node_count: usize,
    vertex_map: PartMap,
    context_map: PartMap,
    vertex: Vec<Shard>,
    context: Vec<Shard>,
}

#[derive(Clone)]
struct PartMap {
    part_of: Vec<u32>,
    local_of: Vec<u32>,
}

impl PartMap {
    fn of(p: &Partitioning) -> Self {
        PartMap {
            part_of: (0..p.node_count())
                .map(|v| p.part_of(v as NodeId) as u32)
                .collect(),
            local_of: p.local_index().to_vec(),
        }
    }

    fn row<'a>(&self, shards: &'a [Shard], v: usize) -> &'a [f32] {
        shards[self.part_of[v] as usize].row(self.local_of[v] as usize)
    }
}

impl EmbeddingStore {
    /// Fresh store: vertex rows uniform in [-0.5/dim, 0.5/dim] drawn from a
    /// single seeded stream in global node order (so values do not depend on
    /// the partition layout), context rows zero. The two matrices usually
    /// share one partitioning, but independent ones are accepted.
    pub fn init(
        vertex_parts: &Partitioning,
        context_parts: &Partitioning,
        dim: usize,
        seed: u64,
    ) -> Self {
        assert_eq!(vertex_parts.node_count(), context_parts.node_count());
        let mut vertex: Vec<Shard> = (0..vertex_parts.num_parts())
            .map(|i| Shard::zeros(vertex_parts.part_size(i), dim))
            .collect();
        let context: Vec<Shard> = (0..context_parts.num_parts())
            .map(|i| Shard::zeros(context_parts.part_size(i), dim))
            .collect();

        let mut rng = seeds::rng(seed, &[INIT_STREAM_TAG]);
        let half = 0.5 / dim as f32;
        for v in 0..vertex_parts.node_count() {
            let row = vertex[vertex_parts.part_of(v as NodeId)]
                .row_mut(vertex_parts.local_of(v as NodeId));
            for x in row {
                *x = rng.random_range(-half..half);
            }
        }

        EmbeddingStore {
            dim,
            node_count: vertex_parts.node_count(),
            vertex_map: PartMap::of(vertex_parts),
            context_map: PartMap::of(context_parts),
            vertex,
            context,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn num_parts(&self) -> usize {
        self.vertex.len()
    }

    pub fn vertex_row(&self, v: NodeId) -> &[f32] {
        self.vertex_map.row(&self.vertex, v as usize)
    }

    pub fn context_row(&self, v: NodeId) -> &[f32] {
        self.context_map.row(&self.context, v as usize)
    }

    /// Moves a vertex/context shard pair out of the store, transferring
    /// ownership to a worker. The slots stay empty until [`EmbeddingStore::put_shards`].
    pub fn take_shards(&mut self, vertex_part: usize, context_part: usize) -> (Shard, Shard) {
        (
            std::mem::take(&mut self.vertex[vertex_part]),
            std::mem::take(&mut self.context[context_part]),
        )
    }

    pub fn put_shards(&mut self, vertex_part: usize, vs: Shard, context_part: usize, cs: Shard) {
        debug_assert_eq!(
            self.vertex[vertex_part].row_count(),
            0,
            "shard slot not empty"
        );
        self.vertex[vertex_part] = vs;
        self.context[context_part] = cs;
    }

    pub fn all_finite(&self) -> bool {
        self.vertex
            .iter()
            .chain(self.context.iter())
            .all(|s| s.as_slice().iter().all(|x| x.is_finite()))
    }

    /// Vertex matrix gathered into global node order.
    pub fn vertex_matrix(&self) -> EmbeddingMatrix {
        self.gather(&self.vertex, &self.vertex_map)
    }

    pub fn context_matrix(&self) -> EmbeddingMatrix {
        self.gather(&self.context, &self.context_map)
    }

    fn gather(&self, shards: &[Shard], map: &PartMap) -> EmbeddingMatrix {
        let mut data = vec![0.0f32; self.node_count * self.dim];
        for v in 0..self.node_count {
            data[v * self.dim..(v + 1) * self.dim].copy_from_slice(map.row(shards, v));
        }
        EmbeddingMatrix {
            dim: self.dim,
            data,
        }
    }
}

/// Dense row-major matrix of one embedding per node, indexed by dense id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub dim: usize,
    pub data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingMatrix {
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// L2-normalizes every row in place; zero rows stay zero.
    pub fn normalize_rows(&mut self) {
        let dim = self.dim;
        for i in 0..self.rows() {
            let row = &mut self.data[i * dim..(i + 1) * dim];
            let norm = row.iter().map(|x| (x * x) as f64).sum::<f64>().sqrt() as f32;
            if norm > 0.0 {
                for x in row {
                    *x /= norm;
                }
            }
        }
    }
}

/// Noise distribution of one context part: alias table over the part's
/// members weighted by degree^0.75. Draws return local row indices, so
/// negatives are shard-local by construction.
pub struct ShardNoise {
    table: AliasTable,
}

impl ShardNoise {
    pub fn build(members: &[NodeId], degrees: &[f64], power: f64) -> Result<Self> {
        let weights: Vec<f64> = members
            .iter()
            .map(|&v| degrees[v as usize].powf(power))
            .collect();
        Ok(ShardNoise {
            table: AliasTable::build(&weights)?,
        })
    }

    pub fn sample_local<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.table.sample(rng)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

/// One logistic update on a (vertex row, context row) pair.
///
/// With p = sigmoid(clamp(v . c)) and g = (label - p) * lr * grad_scale,
/// applies v += g * c_old and c += g * v_old simultaneously and returns the
/// log loss of the pair.
pub fn sgns_update(
    vertex_row: &mut [f32],
    context_row: &mut [f32],
    label: bool,
    lr: f32,
    grad_scale: f32,
) -> f32 {
    debug_assert_eq!(vertex_row.len(), context_row.len());
    let mut dot = 0.0f32;
    for k in 0..vertex_row.len() {
        dot += vertex_row[k] * context_row[k];
    }
    let z = dot.clamp(-MAX_LOGIT, MAX_LOGIT);
    let p = 1.0 / (1.0 + (-z).exp());
    let target = if label { 1.0 } else { 0.0 };
    let g = (target - p) * lr * grad_scale;
    for k in 0..vertex_row.len() {
        let v_old = vertex_row[k];
        let c_old = context_row[k];
        vertex_row[k] = v_old + g * c_old;
        context_row[k] = c_old + g * v_old;
    }
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Counters aggregated over a trained block.
#[derive(Debug, Default, Clone, Copy)]
pub struct BlockStats {
    pub positives: u64,
    pub updates: u64,
    pub negatives_skipped: u64,
    pub loss_sum: f64,
}

impl BlockStats {
    pub fn merge(&mut self, other: &BlockStats) {
        self.positives += other.positives;
        self.updates += other.updates;
        self.negatives_skipped += other.negatives_skipped;
        self.loss_sum += other.loss_sum;
    }

    pub fn mean_loss(&self) -> Option<f64> {
        (self.updates > 0).then(|| self.loss_sum / self.updates as f64)
    }
}

/// Trains one block in sample order: each positive update is followed by
/// `cfg.negatives` negative updates with shard-local targets, resampled up
/// to 8 times when a draw collides with the positive target and skipped
/// after that. `start_index` is the block's first position in the global
/// sample order and drives the learning-rate decay.
#[allow(clippy::too_many_arguments)]
pub fn train_block<R: Rng + ?Sized>(
    samples: &[EdgeSample],
    vertex: &mut Shard,
    context: &mut Shard,
    vertex_local: &[u32],
    context_local: &[u32],
    noise: &ShardNoise,
    cfg: &TrainConfig,
    schedule: LrSchedule,
    start_index: u64,
    rng: &mut R,
) -> BlockStats {
    let mut stats = BlockStats::default();
    let chunk = if cfg.stream_chunk == 0 {
        samples.len().max(1)
    } else {
        cfg.stream_chunk
    };
    let mut index = start_index;
    for streamed in samples.chunks(chunk) {
        for s in streamed {
            let lr = schedule.at(index);
            index += 1;
            let v_local = vertex_local[s.source as usize] as usize;
            let c_local = context_local[s.target as usize] as usize;

            let loss = sgns_update(
                vertex.row_mut(v_local),
                context.row_mut(c_local),
                true,
                lr,
                1.0,
            );
            stats.positives += 1;
            stats.updates += 1;
            stats.loss_sum += loss as f64;

            for _ in 0..cfg.negatives {
                let mut neg = noise.sample_local(rng);
                let mut resamples = 0;
                while neg == c_local && resamples < 8 {
                    neg = noise.sample_local(rng);
                    resamples += 1;
                }
                if neg == c_local {
                    stats.negatives_skipped += 1;
                    continue;
                }
                let loss = sgns_update(
                    vertex.row_mut(v_local),
                    context.row_mut(neg),
                    false,
                    lr,
                    cfg.negative_scale,
                );
                stats.updates += 1;
                stats.loss_sum += loss as f64;
            }
        }
    }
    stats
}
