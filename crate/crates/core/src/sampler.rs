//! Online augmentation: positive pairs are generated from random walks on
//! the fly, so the densified pair set never has to be materialized.
//!
//! Each sampler thread owns a private segment of the pool and a private
//! RNG stream, fills the segment with pairs picked within the augmentation
//! distance on its walks, then decorrelates the segment with a round-robin
//! pseudo shuffle. Segments are handed over only complete, so a filled pool
//! depends on seeds alone, never on thread timing.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::alias::AliasTable;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::pool::{EdgeSample, SamplePool};
use crate::seeds;
use crate::NodeId;

const SAMPLER_STREAM_TAG: u64 = 0x5a;

/// Knobs for walk generation and pool layout.
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    /// Edges per random walk.
    pub walk_length: usize,
    /// Maximum walk distance between two nodes forming a positive pair.
    pub aug_distance: usize,
    /// Samples per pool.
    pub pool_capacity: usize,
    /// Sampler worker threads; each fills capacity / threads samples.
    pub threads: usize,
    pub seed: u64,
    /// Round-robin decorrelation of each thread segment (on by default;
    /// disabling it is only useful for ablation runs).
    pub pseudo_shuffle: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            walk_length: 40,
            aug_distance: 2,
            pool_capacity: 1 << 20,
            threads: 1,
            seed: 1,
            pseudo_shuffle: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.aug_distance < 1 || self.aug_distance > self.walk_length {
            return Err(Error::config(format!(
                "augmentation distance {} must be in [1, walk_length = {}]",
                self.aug_distance, self.walk_length
            )));
        }
        if self.threads == 0 {
            return Err(Error::config("sampler needs at least one thread"));
        }
        if self.pool_capacity == 0 {
            return Err(Error::config("pool capacity must be positive"));
        }
        if !self.pool_capacity.is_multiple_of(self.threads) {
            return Err(Error::config(format!(
                "pool capacity {} not divisible by {} sampler threads",
                self.pool_capacity, self.threads
            )));
        }
        Ok(())
    }
}

/// Draws a walk departure node with probability proportional to degree.
pub fn sample_departure<R: Rng + ?Sized>(g: &Graph, departure: &AliasTable, rng: &mut R) -> NodeId {
    debug_assert_eq!(departure.len(), g.node_count());
    departure.sample(rng) as NodeId
}

/// Weighted random walk of `length` edges from `start`; returns the
/// `length + 1` visited nodes. `start` must not be isolated.
pub fn random_walk<R: Rng + ?Sized>(
    g: &Graph,
    start: NodeId,
    length: usize,
    rng: &mut R,
) -> Vec<NodeId> {
    debug_assert!(g.degree(start) > 0.0, "walk started at isolated node");
    let mut walk = Vec::with_capacity(length + 1);
    walk_into(g, start, length, rng, &mut walk);
    walk
}

fn walk_into<R: Rng + ?Sized>(
    g: &Graph,
    start: NodeId,
    length: usize,
    rng: &mut R,
    out: &mut Vec<NodeId>,
) {
    out.clear();
    out.push(start);
    let mut cur = start;
    for _ in 0..length {
        match g.step(cur, rng) {
            Some(next) => {
                out.push(next);
                cur = next;
            }
            None => break,
        }
    }
}

/// All ordered pairs `(walk[i], walk[j])` with `i < j`, `j - i <= s` and
/// distinct endpoints, emitted by increasing `i` then `j`.
pub fn pairs_within_distance(walk: &[NodeId], s: usize) -> Vec<EdgeSample> {
    let mut out = Vec::new();
    for_pairs(walk, s, |u, v| {
        out.push(EdgeSample::new(u, v));
        true
    });
    out
}

fn for_pairs(walk: &[NodeId], s: usize, mut emit: impl FnMut(NodeId, NodeId) -> bool) {
    debug_assert!(s >= 1);
    for i in 0..walk.len() {
        let hi = (i + s).min(walk.len().saturating_sub(1));
        for j in i + 1..=hi {
            if walk[i] != walk[j] && !emit(walk[i], walk[j]) {
                return;
            }
        }
    }
}

/// Round-robin scatter: sample k goes to block (k mod s); the s blocks are
/// concatenated. A permutation that separates correlated neighbors from the
/// same walk while appending to each block sequentially.
pub fn pseudo_shuffle(samples: &[EdgeSample], s: usize) -> Vec<EdgeSample> {
    assert!(s >= 1);
    let mut out = Vec::with_capacity(samples.len());
    scatter(samples, s, &mut out);
    out
}

fn scatter(samples: &[EdgeSample], s: usize, out: &mut Vec<EdgeSample>) {
    for b in 0..s {
        let mut k = b;
        while k < samples.len() {
            out.push(samples[k]);
            k += s;
        }
    }
}

fn pseudo_shuffle_in_place(seg: &mut [EdgeSample], s: usize, scratch: &mut Vec<EdgeSample>) {
    scratch.clear();
    scatter(seg, s, scratch);
    seg.copy_from_slice(scratch);
}

/// Fraction of consecutive samples that share an endpoint; the correlation
/// proxy the pseudo shuffle is meant to push down.
pub fn adjacent_shared_rate(samples: &[EdgeSample]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let shared = samples
        .windows(2)
        .filter(|w| {
            let (a, b) = (w[0], w[1]);
            a.source == b.source
                || a.source == b.target
                || a.target == b.source
                || a.target == b.target
        })
        .count();
    shared as f64 / (samples.len() - 1) as f64
}

/// Reusable parallel pool filler with one persistent RNG stream per thread.
pub struct Sampler<'g> {
    graph: &'g Graph,
    cfg: SamplerConfig,
    departure: AliasTable,
    rngs: Vec<ChaCha8Rng>,
}

impl<'g> Sampler<'g> {
    pub fn new(graph: &'g Graph, cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        if graph.edge_count() == 0 {
            return Err(Error::invalid("cannot sample from a graph with no edges"));
        }
        let departure = AliasTable::build(graph.degrees())?;
        let rngs = (0..cfg.threads)
            .map(|t| seeds::rng(cfg.seed, &[SAMPLER_STREAM_TAG, t as u64]))
            .collect();
        Ok(Sampler {
            graph,
            cfg,
            departure,
            rngs,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    /// Fills `pool` with exactly `target` samples and marks it ready.
    /// Thread t writes only its private segment, so the result is a pure
    /// function of the per-thread stream states.
    pub fn fill_into(&mut self, pool: &mut SamplePool, target: usize) {
        assert!(target > 0, "fill target must be positive");
        let threads = self.cfg.threads;
        let buf = pool.fill_buffer(target);

        let base = target / threads;
        let rem = target % threads;
        let graph = self.graph;
        let cfg = &self.cfg;
        let departure = &self.departure;

        std::thread::scope(|scope| {
            let mut rest = buf;
            for (t, rng) in self.rngs.iter_mut().enumerate() {
                let seg_len = base + usize::from(t < rem);
                let (seg, tail) = rest.split_at_mut(seg_len);
                rest = tail;
                if seg.is_empty() {
                    continue;
                }
                scope.spawn(move || {
                    fill_segment(graph, cfg, departure, rng, seg);
                });
            }
        });

        pool.mark_ready();
    }

    /// One-shot fill of a fresh pool at configured capacity.
    pub fn fill_pool(&mut self) -> SamplePool {
        let mut pool = SamplePool::new();
        self.fill_into(&mut pool, self.cfg.pool_capacity);
        pool
    }
}

fn fill_segment(
    g: &Graph,
    cfg: &SamplerConfig,
    departure: &AliasTable,
    rng: &mut ChaCha8Rng,
    seg: &mut [EdgeSample],
) {
    let mut walk = Vec::with_capacity(cfg.walk_length + 1);
    let mut write = 0usize;
    while write < seg.len() {
        let start = sample_departure(g, departure, rng);
        walk_into(g, start, cfg.walk_length, rng, &mut walk);
        // A partial final walk is truncated at the segment boundary.
        for_pairs(&walk, cfg.aug_distance, |u, v| {
            seg[write] = EdgeSample::new(u, v);
            write += 1;
            write < seg.len()
        });
    }
    if cfg.pseudo_shuffle {
        let mut scratch = Vec::with_capacity(seg.len());
        pseudo_shuffle_in_place(seg, cfg.aug_distance, &mut scratch);
    }
}

/// Fills one pool to capacity with fresh streams derived from the config
/// seed.
pub fn fill_pool_parallel(g: &Graph, cfg: &SamplerConfig) -> Result<SamplePool> {
    let mut sampler = Sampler::new(g, cfg.clone())?;
    Ok(sampler.fill_pool())
}

/// Dumps a pool as little-endian (source, target) u32 pairs.
pub fn dump_pool(pool: &SamplePool, mut w: impl Write) -> std::io::Result<()> {
    for s in pool.samples() {
        w.write_all(&s.source.to_le_bytes())?;
        w.write_all(&s.target.to_le_bytes())?;
    }
    Ok(())
}
