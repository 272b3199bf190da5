use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, LazyLock};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use gridwalk::eval::{
    auc_from_scores, cosine, make_linkpred_split, node_classification, LabeledNodes,
};
use gridwalk::graph::load_edge_list;
use gridwalk::pipeline::{run, PipelineOptions};
use gridwalk::sampler;
use gridwalk::scheduler::plan_from_counts;

mod config;
mod embeddings;

use config::RunConfig;
use embeddings::{read_embeddings, write_embeddings, write_label_map};

#[derive(Parser)]
#[command(
    name = "gridwalk",
    version,
    about = "Node-embedding trainer: random-walk sampling into grid-parallel skip-gram training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train embeddings on an edge list and write them as text
    Train(Box<TrainArgs>),
    /// Score an embeddings file by multi-label node classification
    EvalCls(EvalClsArgs),
    /// Score an embeddings file by link-prediction AUC over a split
    EvalLp(EvalLpArgs),
    /// Hold out edges from a graph and write a link-prediction split
    SplitLp(SplitLpArgs),
    /// Print graph statistics
    Info(InfoArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WriteWhich {
    Vertex,
    Context,
    Both,
}

#[derive(Parser)]
struct TrainArgs {
    /// Edge list: "src dst" or "src dst weight" per line, # comments
    #[arg(long)]
    input: PathBuf,
    /// Output embeddings file (a .labels id-map sidecar is written next to it)
    #[arg(long)]
    output: PathBuf,
    /// Read defaults from a TOML config; explicit flags still win
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the third edge-list column as weights
    #[arg(long)]
    weighted: bool,

    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    walk_length: Option<usize>,
    /// Max walk distance between paired nodes
    #[arg(long)]
    aug_distance: Option<usize>,
    /// Negative samples per positive
    #[arg(long)]
    negatives: Option<usize>,
    /// Gradient scale for negative updates
    #[arg(long)]
    neg_scale: Option<f32>,
    #[arg(long)]
    lr: Option<f32>,
    /// Positives per episode (0 = 200 x node count)
    #[arg(long)]
    episode_size: Option<usize>,
    /// Samples per pool (0 = one episode per pool)
    #[arg(long)]
    pool_size: Option<usize>,
    #[arg(long)]
    partitions: Option<usize>,
    /// Trainer worker threads
    #[arg(long)]
    workers: Option<usize>,
    /// Sampler threads
    #[arg(long)]
    samplers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Keep each worker's context partition fixed and rotate vertex
    /// partitions instead
    #[arg(long)]
    pinned_context: bool,
    /// L2-normalize rows in the output file
    #[arg(long)]
    normalize_output: bool,
    /// Which matrix to write; "both" adds a .ctx file
    #[arg(long, value_enum, default_value = "vertex")]
    write: WriteWhich,
    /// Write the fully-resolved configuration as TOML
    #[arg(long)]
    save_config: Option<PathBuf>,
    /// Fill one pool and dump it as raw little-endian u32 pairs
    #[arg(long)]
    dump_pool: Option<PathBuf>,
    /// Fill-then-train on one buffer instead of overlapping
    #[arg(long)]
    sequential: bool,
    /// No progress lines
    #[arg(long)]
    quiet: bool,
}

#[derive(Parser)]
struct EvalClsArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// Label file: "node_label class_id" per line, multi-label allowed
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    train_fraction: f64,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// L2-normalize embeddings before training classifiers
    #[arg(long, default_value_t = true)]
    normalize: std::primitive::bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Parser)]
struct EvalLpArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// Prefix written by split-lp; reads {prefix}.pos.edges and
    /// {prefix}.neg.edges
    #[arg(long)]
    split_prefix: String,
}

#[derive(Parser)]
struct SplitLpArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    weighted: bool,
    /// Fraction of edges to hold out
    #[arg(long)]
    fraction: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Writes {prefix}.train.edges, {prefix}.pos.edges, {prefix}.neg.edges
    #[arg(long)]
    out_prefix: String,
}

#[derive(Parser)]
struct InfoArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    weighted: bool,
}

static STOP_FLAG: LazyLock<Arc<AtomicBool>> = LazyLock::new(|| Arc::new(AtomicBool::new(false)));

extern "C" fn on_sigint(_: libc::c_int) {
    STOP_FLAG.store(true, Ordering::Relaxed);
}

fn install_sigint_handler() {
    LazyLock::force(&STOP_FLAG);
    let handler = on_sigint as extern "C" fn(libc::c_int);
    unsafe {
        libc::signal(libc::SIGINT, handler as usize);
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(*args),
        Command::EvalCls(args) => cmd_eval_cls(args),
        Command::EvalLp(args) => cmd_eval_lp(args),
        Command::SplitLp(args) => cmd_split_lp(args),
        Command::Info(args) => cmd_info(args),
    };
    match outcome {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

/// Missing inputs are usage errors: report and exit 2.
fn require_file(path: &Path) {
    if !path.is_file() {
        eprintln!("error: input file {} does not exist", path.display());
        std::process::exit(2);
    }
}

fn load_graph(path: &Path, weighted: bool) -> anyhow::Result<gridwalk::Graph> {
    let (graph, stats) = load_edge_list(path, weighted)?;
    if stats.self_loops_dropped > 0 {
        eprintln!("warning: dropped {} self-loop(s)", stats.self_loops_dropped);
    }
    if stats.duplicate_edges_merged > 0 {
        eprintln!(
            "warning: merged {} duplicate edge(s) by summing weights",
            stats.duplicate_edges_merged
        );
    }
    Ok(graph)
}

fn resolved_config(args: &TrainArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            require_file(path);
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            RunConfig::parse(&text).with_context(|| format!("bad config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    macro_rules! apply {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field { cfg.$field = v; })*
        };
    }
    apply!(
        dim,
        epochs,
        walk_length,
        aug_distance,
        negatives,
        neg_scale,
        lr,
        episode_size,
        pool_size,
        partitions,
        workers,
        samplers,
        seed
    );
    cfg.pinned_context |= args.pinned_context;
    cfg.normalize_output |= args.normalize_output;
    Ok(cfg)
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    require_file(&args.input);
    let cfg = resolved_config(&args)?;
    if let Some(path) = &args.save_config {
        std::fs::write(path, cfg.serialize())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }

    let load_start = Instant::now();
    let graph = load_graph(&args.input, args.weighted)?;
    let load_secs = load_start.elapsed().as_secs_f64();

    if let Some(dump) = &args.dump_pool {
        let plan = plan_from_counts(graph.node_count(), graph.edge_count(), &cfg.train_config());
        let capacity = if cfg.pool_size == 0 {
            plan.episode_size
        } else {
            cfg.pool_size
        };
        let capacity = capacity.div_ceil(cfg.samplers) * cfg.samplers;
        let scfg = gridwalk::SamplerConfig {
            pool_capacity: capacity,
            ..cfg.sampler_config()
        };
        let pool = sampler::fill_pool_parallel(&graph, &scfg)?;
        let file = std::fs::File::create(dump)
            .with_context(|| format!("cannot create {}", dump.display()))?;
        sampler::dump_pool(&pool, std::io::BufWriter::new(file))?;
        eprintln!("dumped {} samples to {}", pool.len(), dump.display());
    }

    install_sigint_handler();
    let opts = PipelineOptions {
        partitions: cfg.partitions,
        workers: cfg.workers,
        pinned_context: cfg.pinned_context,
        copy_shards: false,
        overlap: !args.sequential,
        seed: cfg.seed,
        progress: !args.quiet,
        fill_throttle: None,
        stop: Some(STOP_FLAG.clone()),
    };
    let (store, report) = run(&graph, &cfg.sampler_config(), &cfg.train_config(), &opts)?;

    let labels: Vec<String> = (0..graph.node_count())
        .map(|v| graph.node_name(v as u32))
        .collect();
    let vertex = store.vertex_matrix();
    match args.write {
        WriteWhich::Vertex => {
            write_embeddings(&vertex, &labels, &args.output, cfg.normalize_output)?
        }
        WriteWhich::Context => write_embeddings(
            &store.context_matrix(),
            &labels,
            &args.output,
            cfg.normalize_output,
        )?,
        WriteWhich::Both => {
            write_embeddings(&vertex, &labels, &args.output, cfg.normalize_output)?;
            let ctx_path = PathBuf::from(format!("{}.ctx", args.output.display()));
            write_embeddings(
                &store.context_matrix(),
                &labels,
                &ctx_path,
                cfg.normalize_output,
            )?;
        }
    }
    write_label_map(
        &labels,
        &PathBuf::from(format!("{}.labels", args.output.display())),
    )?;

    if report.interrupted {
        eprintln!(
            "interrupted: wrote partial embeddings to {}",
            args.output.display()
        );
    }
    println!("nodes={}", graph.node_count());
    println!("edges={}", graph.edge_count());
    println!("positives_trained={}", report.total_positives);
    println!("updates={}", report.total_updates);
    println!("pools={}", report.pools);
    println!("episodes={}", report.episodes.len());
    println!(
        "preprocessing_secs={:.3}",
        load_secs + report.preprocess.as_secs_f64()
    );
    println!(
        "training_secs={:.3}",
        (report.wall - report.preprocess).as_secs_f64()
    );
    println!("wall_secs={:.3}", load_secs + report.wall.as_secs_f64());
    println!("fill_busy_secs={:.3}", report.fill_busy.as_secs_f64());
    println!("train_busy_secs={:.3}", report.train_busy.as_secs_f64());
    println!("redistribute_secs={:.3}", report.redistribute.as_secs_f64());
    println!(
        "consumer_wait_secs={:.3}",
        report.consumer_wait.as_secs_f64()
    );
    println!(
        "producer_wait_secs={:.3}",
        report.producer_wait.as_secs_f64()
    );
    println!(
        "train_samples_per_sec={:.0}",
        report.train_samples_per_sec()
    );
    println!(
        "overall_samples_per_sec={:.0}",
        report.overall_samples_per_sec()
    );
    if let Some(loss) = report.final_mean_loss() {
        println!("final_mean_loss={loss:.6}");
    }
    println!("interrupted={}", report.interrupted);
    println!("output={}", args.output.display());
    Ok(())
}

fn row_index(labels: &[String]) -> HashMap<&str, u32> {
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i as u32))
        .collect()
}

fn cmd_eval_cls(args: EvalClsArgs) -> anyhow::Result<()> {
    require_file(&args.embeddings);
    require_file(&args.labels);
    let (labels, matrix) = read_embeddings(&args.embeddings)?;
    let index = row_index(&labels);
    let labeled = LabeledNodes::load(&args.labels, |name| index.get(name).copied())
        .context("labels do not match the embeddings file")?;
    let scores = node_classification(
        &matrix,
        &labeled,
        args.train_fraction,
        args.trials,
        args.normalize,
        args.seed,
    )?;
    println!("labeled_nodes={}", labeled.len());
    println!("classes={}", labeled.num_classes());
    println!("train_fraction={}", args.train_fraction);
    println!("trials={}", args.trials);
    println!("micro_f1={:.6}", scores.micro_f1);
    println!("macro_f1={:.6}", scores.macro_f1);
    Ok(())
}

fn read_pairs(path: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut cols = body.split_whitespace();
        let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
            bail!(
                "{}:{}: expected two node labels",
                path.display(),
                lineno + 1
            );
        };
        pairs.push((a.to_string(), b.to_string()));
    }
    Ok(pairs)
}

fn cmd_eval_lp(args: EvalLpArgs) -> anyhow::Result<()> {
    require_file(&args.embeddings);
    let pos_path = PathBuf::from(format!("{}.pos.edges", args.split_prefix));
    let neg_path = PathBuf::from(format!("{}.neg.edges", args.split_prefix));
    require_file(&pos_path);
    require_file(&neg_path);

    let (labels, matrix) = read_embeddings(&args.embeddings)?;
    let index = row_index(&labels);
    // nodes isolated by the holdout never reach the training edge list;
    // like zero rows they carry no signal and score 0
    let mut missing = 0usize;
    let mut score = |pairs: &[(String, String)]| -> Vec<f64> {
        pairs
            .iter()
            .map(
                |(a, b)| match (index.get(a.as_str()), index.get(b.as_str())) {
                    (Some(&ra), Some(&rb)) => {
                        cosine(matrix.row(ra as usize), matrix.row(rb as usize))
                    }
                    _ => {
                        missing += 1;
                        0.0
                    }
                },
            )
            .collect()
    };
    let pos = score(&read_pairs(&pos_path)?);
    let neg = score(&read_pairs(&neg_path)?);
    if missing > 0 {
        eprintln!(
            "warning: {missing} pair(s) reference nodes absent from the embeddings; scored 0"
        );
    }
    let auc = auc_from_scores(&pos, &neg)?;
    println!("positives={}", pos.len());
    println!("negatives={}", neg.len());
    println!("auc={auc:.6}");
    Ok(())
}

fn cmd_split_lp(args: SplitLpArgs) -> anyhow::Result<()> {
    require_file(&args.input);
    let graph = load_graph(&args.input, args.weighted)?;
    let (split, reduced) = make_linkpred_split(&graph, args.fraction, args.seed)?;

    use std::io::Write;
    let name = |v: u32| graph.node_name(v);

    let train_path = format!("{}.train.edges", args.out_prefix);
    let mut w = std::io::BufWriter::new(std::fs::File::create(&train_path)?);
    for (u, v, weight) in reduced.edges() {
        writeln!(w, "{}\t{}\t{}", name(u), name(v), weight)?;
    }
    w.flush()?;

    for (pairs, suffix) in [(&split.positives, "pos"), (&split.negatives, "neg")] {
        let path = format!("{}.{suffix}.edges", args.out_prefix);
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        for &(u, v) in pairs {
            writeln!(w, "{}\t{}", name(u), name(v))?;
        }
        w.flush()?;
    }

    println!("held_out={}", split.positives.len());
    println!("negatives={}", split.negatives.len());
    println!("train_edges={}", reduced.edge_count());
    println!("prefix={}", args.out_prefix);
    Ok(())
}

fn cmd_info(args: InfoArgs) -> anyhow::Result<()> {
    require_file(&args.input);
    let graph = load_graph(&args.input, args.weighted)?;
    let degrees = graph.degrees();
    let isolated = degrees.iter().filter(|&&d| d == 0.0).count();
    let total: f64 = degrees.iter().sum();
    let max = degrees.iter().cloned().fold(0.0f64, f64::max);
    println!("nodes={}", graph.node_count());
    println!("edges={}", graph.edge_count());
    println!("total_edge_weight={}", total / 2.0);
    println!("mean_degree={:.4}", total / graph.node_count() as f64);
    println!("max_degree={max}");
    println!("isolated_nodes={isolated}");
    Ok(())
}
