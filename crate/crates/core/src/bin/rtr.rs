//! Command-line front end. Every subcommand prints one JSON document on stdout;
//! failures print `{"error": {"kind", "message"}}` and exit 1, usage errors exit 2.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use rtr_core::expressive::DEFAULT_DEPTH;
use rtr_core::graph::{chronological_split, ingest_csv, DataSplit, EvalMode, GraphOptions, IngestOptions};
use rtr_core::harness::{self, evaluate, parse_checkers, prepare, run_isotest, train, RunConfig};
use rtr_core::model::RtrModel;
use rtr_core::synth::{
    cuneiform_corpus, gen_periodic_bipartite, oscillating_corpus, read_corpus, write_corpus, CuneiformConfig, OscillatingConfig, PeriodicSpec,
};
use rtr_core::{Error, Result};

#[derive(Parser)]
#[command(name = "rtr", version, about = "Recurrent temporal revision: training, evaluation and isomorphism tests")]
struct Cli {
    /// JSON config file (run config for train/eval, generator config for gen).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed; overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and validate an event CSV; optionally write it back with dense ids.
    Ingest(IngestArgs),
    /// Chronological train/val/test split with an inductive node mask.
    Split(SplitArgs),
    /// Train a model; writes model.ckpt, metrics.json and manifest.json into --out.
    Train,
    /// Evaluate a checkpoint on the configured test split.
    Eval(EvalArgs),
    /// Run isomorphism engines over a labeled corpus.
    Isotest(IsotestArgs),
    /// Generate a synthetic corpus or event stream into --out.
    Gen(GenArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    directed: bool,
    #[arg(long)]
    dense_ids: bool,
    #[arg(long)]
    allow_self_loops: bool,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    dense_ids: bool,
    #[arg(long, default_value_t = 0.7)]
    train: f64,
    #[arg(long, default_value_t = 0.15)]
    val: f64,
    #[arg(long, default_value_t = 0.15)]
    test: f64,
    #[arg(long, default_value_t = 0.1)]
    mask: f64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<EvalMode>,
}

fn parse_mode(s: &str) -> std::result::Result<EvalMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args)]
struct IsotestArgs {
    /// Corpus directory holding manifest.json.
    #[arg(long)]
    corpus: PathBuf,
    /// Comma-separated: t1wl, rtr, rtr-hetero, pint-pos, oracle.
    #[arg(long, default_value = "t1wl,rtr,rtr-hetero,pint-pos")]
    engines: String,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    depth: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    OscillatingCsl,
    Cuneiform,
    Periodic,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    task: Task,
    /// CSL node count (oscillating-csl).
    #[arg(long)]
    n: Option<usize>,
    /// Number of pairs (corpus tasks).
    #[arg(long)]
    pairs: Option<usize>,
    /// Fraction of isomorphic pairs (corpus tasks).
    #[arg(long)]
    iso_fraction: Option<f64>,
    /// Event count (periodic).
    #[arg(long)]
    events: Option<usize>,
}

/// Open for reading, naming the path in the error.
fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, v)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn run_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config <run config JSON> is required".into()))?;
    let mut cfg: RunConfig = read_json(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn version() -> String {
    format!("rtr {}", env!("CARGO_PKG_VERSION"))
}

fn ingest(cli: &Cli, a: &IngestArgs) -> Result<Value> {
    let opts = IngestOptions { dense_ids: a.dense_ids, num_nodes: None, graph: GraphOptions { directed: a.directed, allow_self_loops: a.allow_self_loops } };
    let g = ingest_csv(open(&a.input)?, &opts)?;
    if let Some(out) = &cli.out {
        g.write_csv(BufWriter::new(File::create(out)?))?;
    }
    let ts = g.timestamps();
    Ok(json!({
        "events": g.num_events(),
        "nodes": g.num_nodes(),
        "edge_dim": g.edge_dim(),
        "distinct_times": ts.len(),
        "t_min": ts.first(),
        "t_max": ts.last(),
        "out": cli.out,
    }))
}

fn split(cli: &Cli, a: &SplitArgs) -> Result<Value> {
    let opts = IngestOptions { dense_ids: a.dense_ids, ..Default::default() };
    let g = ingest_csv(open(&a.input)?, &opts)?;
    let s: DataSplit = chronological_split(&g, (a.train, a.val, a.test), a.mask, cli.seed.unwrap_or(0))?;
    let v = serde_json::to_value(&s)?;
    if let Some(out) = &cli.out {
        write_json(out, &v)?;
    }
    Ok(v)
}

fn train_cmd(cli: &Cli) -> Result<Value> {
    let cfg = run_config(cli)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("run"));
    std::fs::create_dir_all(&out)?;
    let (g, split) = prepare(&cfg)?;
    let (model, report) = train(&cfg, &g, &split)?;
    model.save(&out.join("model.ckpt"))?;
    write_json(&out.join("metrics.json"), &report)?;
    let manifest = json!({
        "version": version(),
        "config": cfg,
        "objective": report.objective,
        "environment": { "os": std::env::consts::OS, "arch": std::env::consts::ARCH, "float": "f64" },
        "events": g.num_events(),
        "nodes": g.num_nodes(),
        "split": split,
    });
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(serde_json::to_value(&report)?)
}

fn eval_cmd(cli: &Cli, a: &EvalArgs) -> Result<Value> {
    let cfg = run_config(cli)?;
    let ckpt = match &a.checkpoint {
        Some(p) => p.clone(),
        None => cli.out.clone().unwrap_or_else(|| PathBuf::from("run")).join("model.ckpt"),
    };
    let mut model = RtrModel::load(&ckpt)?;
    let (g, split) = prepare(&cfg)?;
    let report = evaluate(&mut model, &g, &split, cfg.optim.batch_size, cfg.seed)?;
    let v = match a.mode {
        Some(m) => {
            let r = report.mode(m).ok_or_else(|| Error::Validation(format!("no scorable {m} test events")))?;
            json!({ "mode": m, "ap": r.ap, "auc": r.auc, "pairs": r.pairs })
        }
        None => serde_json::to_value(&report)?,
    };
    Ok(v)
}

fn isotest(cli: &Cli, a: &IsotestArgs) -> Result<Value> {
    let pairs = read_corpus(&a.corpus)?;
    let checkers = parse_checkers(&a.engines)?;
    let report = run_isotest(&pairs, &checkers, a.depth)?;
    let v = serde_json::to_value(&report)?;
    if let Some(out) = &cli.out {
        write_json(out, &v)?;
    }
    Ok(v)
}

fn gen(cli: &Cli, a: &GenArgs) -> Result<Value> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("corpus"));
    let seed = cli.seed.unwrap_or(0);
    let split_pairs = |pairs: usize, iso: f64| {
        let n_iso = (pairs as f64 * iso).round() as usize;
        (pairs - n_iso, n_iso)
    };
    match a.task {
        Task::OscillatingCsl => {
            let mut cfg: OscillatingConfig = cli.config.as_deref().map(read_json).transpose()?.unwrap_or_default();
            if let Some(n) = a.n {
                cfg.n = n;
            }
            if a.pairs.is_some() || a.iso_fraction.is_some() {
                let total = a.pairs.unwrap_or(cfg.non_isomorphic + cfg.isomorphic);
                let frac = a.iso_fraction.unwrap_or(cfg.isomorphic as f64 / (cfg.non_isomorphic + cfg.isomorphic).max(1) as f64);
                (cfg.non_isomorphic, cfg.isomorphic) = split_pairs(total, frac);
            }
            let pairs = oscillating_corpus(&cfg, seed)?;
            write_corpus(&out, &pairs)?;
            Ok(json!({ "task": "oscillating-csl", "pairs": pairs.len(), "config": cfg, "out": out }))
        }
        Task::Cuneiform => {
            let mut cfg: CuneiformConfig = cli.config.as_deref().map(read_json).transpose()?.unwrap_or_default();
            if let Some(p) = a.pairs {
                cfg.pairs = p;
            }
            if let Some(f) = a.iso_fraction {
                cfg.iso_fraction = f;
            }
            let pairs = cuneiform_corpus(&cfg, seed)?;
            write_corpus(&out, &pairs)?;
            Ok(json!({ "task": "cuneiform", "pairs": pairs.len(), "config": cfg, "out": out }))
        }
        Task::Periodic => {
            let mut spec: PeriodicSpec = cli.config.as_deref().map(read_json).transpose()?.unwrap_or_default();
            if let Some(e) = a.events {
                spec.events = e;
            }
            let g = gen_periodic_bipartite(&spec, &mut harness::rng(seed))?;
            std::fs::create_dir_all(&out)?;
            let path = out.join("events.csv");
            g.write_csv(BufWriter::new(File::create(&path)?))?;
            let data = json!({ "kind": "csv", "path": path, "directed": true, "dense_ids": true });
            Ok(json!({ "task": "periodic", "events": g.num_events(), "nodes": g.num_nodes(), "spec": spec, "data": data }))
        }
    }
}

fn run(cli: &Cli) -> Result<Value> {
    match &cli.cmd {
        Cmd::Ingest(a) => ingest(cli, a),
        Cmd::Split(a) => split(cli, a),
        Cmd::Train => train_cmd(cli),
        Cmd::Eval(a) => eval_cmd(cli, a),
        Cmd::Isotest(a) => isotest(cli, a),
        Cmd::Gen(a) => gen(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (doc, code) = match run(&cli) {
        Ok(v) => (serde_json::to_string_pretty(&v).expect("json value serializes"), ExitCode::SUCCESS),
        Err(e) => (json!({ "error": { "kind": e.kind(), "message": e.to_string() } }).to_string(), ExitCode::FAILURE),
    };
    // A closed stdout (e.g. piped into `head`) is not an error worth reporting.
    let _ = writeln!(std::io::stdout().lock(), "{doc}");
    code
}
