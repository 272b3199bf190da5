//! End-to-end run loop with the producer/consumer collaboration strategy:
//! two sample pools, samplers always filling one while the trainer consumes
//! the other, swapping at pool boundaries. Either side blocks at the swap
//! point when it runs ahead.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::partition::{redistribute, zigzag_partition};
use crate::pool::SamplePool;
use crate::sampler::{Sampler, SamplerConfig};
use crate::scheduler::{plan_from_counts, GridTrainer, SchedulerOptions};
use crate::trainer::{EmbeddingStore, TrainConfig};

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub partitions: usize,
    pub workers: usize,
    pub pinned_context: bool,
    pub copy_shards: bool,
    /// Overlap producers and trainer on two pools; turning this off runs
    /// fill-then-train on a single buffer (the sequential baseline).
    pub overlap: bool,
    pub seed: u64,
    /// Line-oriented progress to stderr after each pool.
    pub progress: bool,
    /// Test instrumentation: extra latency added to every pool fill.
    pub fill_throttle: Option<Duration>,
    /// Checked at pool boundaries; a graceful-stop request returns the
    /// partial store with `interrupted` set in the report.
    pub stop: Option<Arc<AtomicBool>>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            partitions: 1,
            workers: 1,
            pinned_context: false,
            copy_shards: false,
            overlap: true,
            seed: 1,
            progress: false,
            fill_throttle: None,
            stop: None,
        }
    }
}

/// Per-episode entry in the run report.
#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub episode: u64,
    pub positives: u64,
    pub mean_loss: Option<f64>,
    pub lr_end: f32,
}

/// Timing and throughput accounting of one training run.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    /// Partitioning, noise tables and embedding init.
    pub preprocess: Duration,
    /// Producer time spent filling pools.
    pub fill_busy: Duration,
    /// Consumer time spent bucketing pools (counted toward training).
    pub redistribute: Duration,
    /// Consumer time spent in episodes.
    pub train_busy: Duration,
    /// Consumer time blocked waiting for a filled pool.
    pub consumer_wait: Duration,
    /// Producer time blocked waiting for a free pool.
    pub producer_wait: Duration,
    pub wall: Duration,
    pub pools: u64,
    pub total_positives: u64,
    pub total_updates: u64,
    pub episodes: Vec<EpisodeLog>,
    pub interrupted: bool,
}

impl RunReport {
    /// Positives per second of consumer busy time (redistribute + training).
    pub fn train_samples_per_sec(&self) -> f64 {
        let secs = (self.train_busy + self.redistribute).as_secs_f64();
        if secs > 0.0 {
            self.total_positives as f64 / secs
        } else {
            0.0
        }
    }

    pub fn overall_samples_per_sec(&self) -> f64 {
        let secs = self.wall.as_secs_f64();
        if secs > 0.0 {
            self.total_positives as f64 / secs
        } else {
            0.0
        }
    }

    pub fn final_mean_loss(&self) -> Option<f64> {
        self.episodes.iter().rev().find_map(|e| e.mean_loss)
    }
}

/// Hands out pool fill sizes until the planned sample budget is spent.
struct FillPlan {
    remaining: u64,
    capacity: usize,
}

impl FillPlan {
    fn next_target(&mut self) -> Option<usize> {
        if self.remaining == 0 {
            return None;
        }
        let t = self.remaining.min(self.capacity as u64) as usize;
        self.remaining -= t as u64;
        Some(t)
    }
}

/// Trains embeddings for `g` and returns the store plus the run report.
pub fn run(
    g: &Graph,
    sampler_cfg: &SamplerConfig,
    train_cfg: &TrainConfig,
    opts: &PipelineOptions,
) -> Result<(EmbeddingStore, RunReport)> {
    let begin = Instant::now();
    train_cfg.validate()?;
    let plan = plan_from_counts(g.node_count(), g.edge_count(), train_cfg);

    // Pool capacity 0 means one pool per episode.
    let mut capacity = if sampler_cfg.pool_capacity == 0 {
        plan.episode_size
    } else {
        sampler_cfg.pool_capacity
    };
    capacity = capacity.div_ceil(sampler_cfg.threads) * sampler_cfg.threads;
    let scfg = SamplerConfig {
        pool_capacity: capacity,
        ..sampler_cfg.clone()
    };
    scfg.validate()?;

    let partitioning = zigzag_partition(g.degrees(), opts.partitions)?;
    let mut store = EmbeddingStore::init(&partitioning, &partitioning, train_cfg.dim, opts.seed);
    let mut trainer = GridTrainer::new(
        g,
        &partitioning,
        &partitioning,
        train_cfg,
        SchedulerOptions {
            workers: opts.workers,
            pinned_context: opts.pinned_context,
            copy_shards: opts.copy_shards,
            seed: opts.seed,
        },
    )?;
    let sampler = Sampler::new(g, scfg)?;

    let mut report = RunReport {
        preprocess: begin.elapsed(),
        ..Default::default()
    };

    let plan = FillPlan {
        remaining: plan.total_samples,
        capacity,
    };
    if opts.overlap {
        run_overlapped(
            sampler,
            &mut trainer,
            &partitioning,
            &mut store,
            plan,
            opts,
            &mut report,
        )?;
    } else {
        run_sequential(
            sampler,
            &mut trainer,
            &partitioning,
            &mut store,
            plan,
            opts,
            &mut report,
        )?;
    }

    debug_assert!(store.all_finite());
    report.wall = begin.elapsed();
    Ok((store, report))
}

fn stop_requested(opts: &PipelineOptions) -> bool {
    opts.stop
        .as_ref()
        .is_some_and(|s| s.load(Ordering::Relaxed))
}

fn run_overlapped(
    mut sampler: Sampler<'_>,
    trainer: &mut GridTrainer<'_>,
    partitioning: &crate::partition::Partitioning,
    store: &mut EmbeddingStore,
    mut plan: FillPlan,
    opts: &PipelineOptions,
    report: &mut RunReport,
) -> Result<()> {
    let (to_producer, fill_queue) = mpsc::channel::<(SamplePool, usize)>();
    let (to_consumer, ready_queue) = mpsc::channel::<SamplePool>();
    let throttle = opts.fill_throttle;

    std::thread::scope(|scope| {
        let producer = scope.spawn(move || {
            let mut busy = Duration::ZERO;
            let mut waited = Duration::ZERO;
            loop {
                let wait_start = Instant::now();
                let Ok((mut pool, target)) = fill_queue.recv() else {
                    break;
                };
                waited += wait_start.elapsed();
                if let Some(d) = throttle {
                    std::thread::sleep(d);
                }
                let fill_start = Instant::now();
                sampler.fill_into(&mut pool, target);
                busy += fill_start.elapsed();
                if to_consumer.send(pool).is_err() {
                    break;
                }
            }
            (busy, waited)
        });

        let send = |pool, target| {
            to_producer
                .send((pool, target))
                .map_err(|_| Error::Worker("sampler thread exited early".into()))
        };

        // Prime both pools, then keep exactly one pool on each side. Any
        // failure falls through to the single join point below so the
        // producer is never left waiting on a live channel.
        let consumed: Result<()> = (|| {
            let mut in_flight = 0usize;
            for _ in 0..2 {
                if let Some(target) = plan.next_target() {
                    send(SamplePool::new(), target)?;
                    in_flight += 1;
                }
            }
            while in_flight > 0 {
                if stop_requested(opts) {
                    report.interrupted = true;
                    break;
                }
                let wait_start = Instant::now();
                let mut pool = ready_queue
                    .recv()
                    .map_err(|_| Error::Worker("sampler thread exited early".into()))?;
                report.consumer_wait += wait_start.elapsed();
                in_flight -= 1;

                consume_pool(trainer, partitioning, store, &mut pool, opts, report)?;

                if let Some(target) = plan.next_target() {
                    pool.reset();
                    send(pool, target)?;
                    in_flight += 1;
                }
            }
            Ok(())
        })();

        drop(to_producer);
        match producer.join() {
            Ok((busy, waited)) => {
                report.fill_busy = busy;
                report.producer_wait = waited;
                consumed
            }
            Err(_) => Err(Error::Worker("sampler thread panicked".into())),
        }
    })
}

fn run_sequential(
    mut sampler: Sampler<'_>,
    trainer: &mut GridTrainer<'_>,
    partitioning: &crate::partition::Partitioning,
    store: &mut EmbeddingStore,
    mut plan: FillPlan,
    opts: &PipelineOptions,
    report: &mut RunReport,
) -> Result<()> {
    let mut pool = SamplePool::new();
    while let Some(target) = plan.next_target() {
        if stop_requested(opts) {
            report.interrupted = true;
            break;
        }
        if let Some(d) = opts.fill_throttle {
            std::thread::sleep(d);
        }
        let fill_start = Instant::now();
        sampler.fill_into(&mut pool, target);
        report.fill_busy += fill_start.elapsed();

        consume_pool(trainer, partitioning, store, &mut pool, opts, report)?;
        pool.reset();
    }
    Ok(())
}

fn consume_pool(
    trainer: &mut GridTrainer<'_>,
    partitioning: &crate::partition::Partitioning,
    store: &mut EmbeddingStore,
    pool: &mut SamplePool,
    opts: &PipelineOptions,
    report: &mut RunReport,
) -> Result<()> {
    let t = Instant::now();
    redistribute(pool, partitioning, partitioning);
    report.redistribute += t.elapsed();

    let t = Instant::now();
    let episodes = trainer.train_pool(pool, store)?;
    report.train_busy += t.elapsed();
    report.pools += 1;

    for e in episodes {
        report.total_positives += e.positives;
        report.total_updates += e.updates;
        report.episodes.push(EpisodeLog {
            episode: e.index,
            positives: e.positives,
            mean_loss: e.mean_loss,
            lr_end: e.lr_end,
        });
    }

    if opts.progress {
        let done = trainer.samples_done();
        let total = trainer.plan().total_samples;
        let epochs = trainer.config().epochs as f64;
        let last = report.episodes.last();
        eprintln!(
            "[train] epoch {:.1}/{} ({:.1}%) lr {:.5} loss {} rate {:.0}/s",
            epochs * done as f64 / total as f64,
            epochs,
            100.0 * done as f64 / total as f64,
            last.map(|e| e.lr_end).unwrap_or(0.0),
            last.and_then(|e| e.mean_loss)
                .map_or("-".to_string(), |l| format!("{l:.4}")),
            report.train_samples_per_sec(),
        );
    }
    Ok(())
}
