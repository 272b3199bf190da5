//! Episode orchestration: rotate orthogonal block assignments across
//! workers, move shards in and out, and enforce the episode-size bound on
//! synchronization granularity.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::partition::Partitioning;
use crate::pool::{PoolState, SamplePool};
use crate::seeds;
use crate::trainer::{
    train_block, BlockStats, EmbeddingStore, LrSchedule, ShardNoise, TrainConfig, NOISE_POWER,
};

const BLOCK_STREAM_TAG: u64 = 0xb1;

/// Rotating assignment of grid blocks to workers.
///
/// Step k assigns slot i the block (i, (i + offset) mod n), so concurrent
/// blocks never share a vertex or context part, and n consecutive steps
/// visit every block exactly once. With `pinned_context` the context side
/// stays fixed per slot and the vertex side rotates instead.
#[derive(Debug, Clone)]
pub struct EpisodeSchedule {
    num_workers: usize,
    num_parts: usize,
    offset: usize,
    pinned_context: bool,
}

/// One block handed to one worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub worker: usize,
    pub vertex_part: usize,
    pub context_part: usize,
}

impl EpisodeSchedule {
    pub fn new(num_workers: usize, num_parts: usize, pinned_context: bool) -> Result<Self> {
        if num_workers == 0 || num_parts == 0 {
            return Err(Error::config("need at least one worker and one partition"));
        }
        Ok(EpisodeSchedule {
            num_workers,
            num_parts,
            offset: 0,
            pinned_context,
        })
    }

    pub fn num_parts(&self) -> usize {
        self.num_parts
    }

    /// Workers that can be busy simultaneously; never more than the number
    /// of orthogonal blocks.
    pub fn effective_workers(&self) -> usize {
        self.num_workers.min(self.num_parts)
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    /// The orthogonal block set for the current rotation step; advances the
    /// rotation. With fewer workers than parts the set is processed in
    /// subgroups of `effective_workers` blocks.
    pub fn next_assignment(&mut self) -> Vec<Assignment> {
        let n = self.num_parts;
        let w = self.effective_workers();
        let out = (0..n)
            .map(|i| {
                let rotated = (i + self.offset) % n;
                let (vid, cid) = if self.pinned_context {
                    (rotated, i)
                } else {
                    (i, rotated)
                };
                Assignment {
                    worker: i % w,
                    vertex_part: vid,
                    context_part: cid,
                }
            })
            .collect();
        self.offset = (self.offset + 1) % n;
        out
    }
}

fn assert_orthogonal(assignments: &[Assignment]) {
    for (k, a) in assignments.iter().enumerate() {
        for b in &assignments[..k] {
            assert!(
                a.vertex_part != b.vertex_part && a.context_part != b.context_part,
                "schedule produced non-orthogonal blocks {a:?} / {b:?}"
            );
        }
    }
}

/// Sample budget of a full run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainPlan {
    pub total_samples: u64,
    pub episode_size: usize,
    pub episodes: u64,
}

/// Positive-sample budget: one epoch trains `edge_count` positives. The
/// default episode size scales with the node count (200 per node) so the
/// synchronization interval tracks the embedding-matrix size.
pub fn plan_from_counts(node_count: usize, edge_count: usize, cfg: &TrainConfig) -> TrainPlan {
    let total_samples = cfg.epochs as u64 * edge_count as u64;
    let episode_size = if cfg.episode_size == 0 {
        200 * node_count
    } else {
        cfg.episode_size
    };
    let episodes = total_samples.div_ceil(episode_size as u64);
    TrainPlan {
        total_samples,
        episode_size,
        episodes,
    }
}

pub fn plan_training(g: &Graph, cfg: &TrainConfig) -> TrainPlan {
    plan_from_counts(g.node_count(), g.edge_count(), cfg)
}

/// Options for the episode runner.
#[derive(Debug, Clone)]
pub struct SchedulerOptions {
    pub workers: usize,
    pub pinned_context: bool,
    /// Train on copies of the shards and scatter them back, exercising the
    /// gather/scatter contract instead of moving ownership.
    pub copy_shards: bool,
    pub seed: u64,
}

impl Default for SchedulerOptions {
    fn default() -> Self {
        SchedulerOptions {
            workers: 1,
            pinned_context: false,
            copy_shards: false,
            seed: 1,
        }
    }
}

/// Statistics of one episode (one synchronization interval).
#[derive(Debug, Clone)]
pub struct EpisodeStats {
    pub index: u64,
    pub positives: u64,
    pub updates: u64,
    pub negatives_skipped: u64,
    pub mean_loss: Option<f64>,
    pub lr_end: f32,
    pub wall: Duration,
}

/// Drives grid training over redistributed pools: assigns orthogonal blocks
/// to workers per rotation step, slices pools into episodes no larger than
/// the planned episode size, and keeps the global sample counter that the
/// learning-rate decay follows.
pub struct GridTrainer<'p> {
    vertex_parts: &'p Partitioning,
    context_parts: &'p Partitioning,
    cfg: TrainConfig,
    schedule: EpisodeSchedule,
    lr: LrSchedule,
    plan: TrainPlan,
    noise: Vec<ShardNoise>,
    opts: SchedulerOptions,
    episodes_run: u64,
    samples_done: u64,
}

struct Job {
    assignment: Assignment,
    step: u64,
    range: std::ops::Range<usize>,
    start_index: u64,
    episode: u64,
}

impl<'p> GridTrainer<'p> {
    /// `vertex_parts` and `context_parts` are usually the same partitioning;
    /// independent ones are accepted as long as the part counts match.
    pub fn new(
        g: &Graph,
        vertex_parts: &'p Partitioning,
        context_parts: &'p Partitioning,
        cfg: &TrainConfig,
        opts: SchedulerOptions,
    ) -> Result<Self> {
        cfg.validate()?;
        if vertex_parts.num_parts() != context_parts.num_parts() {
            return Err(Error::config(
                "vertex and context partition counts must match",
            ));
        }
        let plan = plan_training(g, cfg);
        let schedule =
            EpisodeSchedule::new(opts.workers, vertex_parts.num_parts(), opts.pinned_context)?;
        let noise = (0..context_parts.num_parts())
            .map(|j| ShardNoise::build(context_parts.members(j), g.degrees(), NOISE_POWER))
            .collect::<Result<Vec<_>>>()?;
        let lr = LrSchedule {
            initial: cfg.lr_initial,
            floor_ratio: cfg.lr_floor_ratio,
            total: plan.total_samples,
        };
        Ok(GridTrainer {
            vertex_parts,
            context_parts,
            cfg: cfg.clone(),
            schedule,
            lr,
            plan,
            noise,
            opts,
            episodes_run: 0,
            samples_done: 0,
        })
    }

    pub fn plan(&self) -> TrainPlan {
        self.plan
    }

    pub fn samples_done(&self) -> u64 {
        self.samples_done
    }

    pub fn lr_schedule(&self) -> LrSchedule {
        self.lr
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// RNG seed of one block's negative-sampling stream; exposed so a
    /// reference implementation can replay the exact draw sequence.
    pub fn block_seed(&self, episode: u64, vertex_part: usize, context_part: usize) -> u64 {
        seeds::derive(
            self.opts.seed,
            &[
                BLOCK_STREAM_TAG,
                episode,
                vertex_part as u64,
                context_part as u64,
            ],
        )
    }

    /// Trains everything in a redistributed pool and marks it consumed.
    /// The pool is consumed as one episode when it fits the episode size,
    /// otherwise split (proportionally, in rotation order) into several.
    pub fn train_pool(
        &mut self,
        pool: &mut SamplePool,
        store: &mut EmbeddingStore,
    ) -> Result<Vec<EpisodeStats>> {
        self.train_pool_observed(pool, store, |_, _| {})
    }

    /// Like [`GridTrainer::train_pool`], invoking `observer` after every
    /// rotation step with the assignments the step just trained.
    pub fn train_pool_observed(
        &mut self,
        pool: &mut SamplePool,
        store: &mut EmbeddingStore,
        mut observer: impl FnMut(&EmbeddingStore, &[Assignment]),
    ) -> Result<Vec<EpisodeStats>> {
        assert_eq!(
            pool.state(),
            PoolState::Ready,
            "pool must be filled before training"
        );
        assert_eq!(
            pool.grid_parts(),
            Some(self.vertex_parts.num_parts()),
            "pool must be redistributed for this partitioning"
        );

        let episodes = self.slice_into_episodes(pool);
        let mut out = Vec::new();
        for jobs in &episodes {
            out.push(self.run_episode_jobs(jobs, pool, store, &mut observer)?);
        }
        pool.mark_consumed();
        Ok(out)
    }

    /// Lays the pool's blocks out in rotation order and cuts the sequence
    /// into episodes of at most `episode_size` positives, splitting a block
    /// at the boundary when necessary.
    fn slice_into_episodes(&mut self, pool: &SamplePool) -> Vec<Vec<Job>> {
        let n = self.schedule.num_parts();
        let grid = |i: usize, j: usize| {
            // absolute range of block (i, j) in the pool
            let mut start = 0usize;
            for bi in 0..i * n + j {
                start += pool.block_len(bi / n, bi % n);
            }
            start..start + pool.block_len(i, j)
        };

        let budget = self.plan.episode_size;
        let mut episodes: Vec<Vec<Job>> = Vec::new();
        let mut current: Vec<Job> = Vec::new();
        let mut left = budget;

        for step in 0..n as u64 {
            let assignments = self.schedule.next_assignment();
            assert_orthogonal(&assignments);
            for a in assignments {
                let full = grid(a.vertex_part, a.context_part);
                let mut cursor = full.start;
                while cursor < full.end {
                    let take = (full.end - cursor).min(left);
                    let episode = self.episodes_run + episodes.len() as u64;
                    current.push(Job {
                        assignment: a,
                        step,
                        range: cursor..cursor + take,
                        start_index: self.samples_done,
                        episode,
                    });
                    self.samples_done += take as u64;
                    cursor += take;
                    left -= take;
                    if left == 0 {
                        episodes.push(std::mem::take(&mut current));
                        left = budget;
                    }
                }
            }
        }
        if !current.is_empty() {
            episodes.push(current);
        }
        self.episodes_run += episodes.len() as u64;
        episodes
    }

    fn run_episode_jobs(
        &self,
        jobs: &[Job],
        pool: &SamplePool,
        store: &mut EmbeddingStore,
        observer: &mut impl FnMut(&EmbeddingStore, &[Assignment]),
    ) -> Result<EpisodeStats> {
        let begin = Instant::now();
        let w = self.schedule.effective_workers();
        let mut stats = BlockStats::default();
        let episode_index = jobs.first().map(|j| j.episode).unwrap_or(self.episodes_run);

        let mut k = 0usize;
        while k < jobs.len() {
            // one rotation step: consecutive jobs with the same step tag
            let step_end = (k..jobs.len())
                .find(|&m| jobs[m].step != jobs[k].step)
                .unwrap_or(jobs.len());
            let step_jobs = &jobs[k..step_end];
            k = step_end;

            for wave in step_jobs.chunks(w) {
                stats.merge(&self.run_wave(wave, pool, store)?);
            }
            let touched: Vec<Assignment> = step_jobs.iter().map(|j| j.assignment).collect();
            observer(store, &touched);
        }

        Ok(EpisodeStats {
            index: episode_index,
            positives: stats.positives,
            updates: stats.updates,
            negatives_skipped: stats.negatives_skipped,
            mean_loss: stats.mean_loss(),
            lr_end: self.lr.at(jobs
                .last()
                .map(|j| j.start_index + j.range.len() as u64)
                .unwrap_or(0)),
            wall: begin.elapsed(),
        })
    }

    fn run_wave(
        &self,
        wave: &[Job],
        pool: &SamplePool,
        store: &mut EmbeddingStore,
    ) -> Result<BlockStats> {
        let mut merged = BlockStats::default();
        if wave.len() == 1 {
            // single assignment: no point paying a thread spawn
            let job = &wave[0];
            let (mut vs, mut cs) =
                store.take_shards(job.assignment.vertex_part, job.assignment.context_part);
            let stats = self.run_job(job, pool, &mut vs, &mut cs);
            store.put_shards(
                job.assignment.vertex_part,
                vs,
                job.assignment.context_part,
                cs,
            );
            merged.merge(&stats);
            return Ok(merged);
        }

        let mut failed = false;
        std::thread::scope(|scope| {
            let mut handles = Vec::with_capacity(wave.len());
            for job in wave {
                let (vs, cs) =
                    store.take_shards(job.assignment.vertex_part, job.assignment.context_part);
                handles.push((
                    job.assignment,
                    scope.spawn(move || {
                        let mut vs = vs;
                        let mut cs = cs;
                        let stats = self.run_job(job, pool, &mut vs, &mut cs);
                        (vs, cs, stats)
                    }),
                ));
            }
            for (a, handle) in handles {
                match handle.join() {
                    Ok((vs, cs, stats)) => {
                        store.put_shards(a.vertex_part, vs, a.context_part, cs);
                        merged.merge(&stats);
                    }
                    Err(_) => failed = true,
                }
            }
        });
        if failed {
            return Err(Error::Worker(
                "a trainer worker panicked; store state is undefined".into(),
            ));
        }
        Ok(merged)
    }

    fn run_job(
        &self,
        job: &Job,
        pool: &SamplePool,
        vs: &mut crate::trainer::Shard,
        cs: &mut crate::trainer::Shard,
    ) -> BlockStats {
        let samples = &pool.samples()[job.range.clone()];
        let noise = &self.noise[job.assignment.context_part];
        let mut rng = seeds::rng_from(self.block_seed(
            job.episode,
            job.assignment.vertex_part,
            job.assignment.context_part,
        ));
        if self.opts.copy_shards {
            let mut vs2 = vs.clone();
            let mut cs2 = cs.clone();
            let stats = train_block(
                samples,
                &mut vs2,
                &mut cs2,
                self.vertex_parts.local_index(),
                self.context_parts.local_index(),
                noise,
                &self.cfg,
                self.lr,
                job.start_index,
                &mut rng,
            );
            *vs = vs2;
            *cs = cs2;
            stats
        } else {
            train_block(
                samples,
                vs,
                cs,
                self.vertex_parts.local_index(),
                self.context_parts.local_index(),
                noise,
                &self.cfg,
                self.lr,
                job.start_index,
                &mut rng,
            )
        }
    }
}
