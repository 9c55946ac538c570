use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    candidate_pool, chronological_split, ingest_csv, sample_negatives, DataSplit, EvalMode, Event, GraphOptions, IngestOptions, NodeId, TemporalGraph,
};
use crate::harness::metrics::{average_precision, roc_auc};
use crate::harness::rng;
use crate::model::{ModelShape, RtrConfig, RtrModel};
use crate::nn::{Adam, Tape};
use crate::synth::{gen_periodic_bipartite, PeriodicSpec};

/// Where the event stream comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        directed: bool,
        /// Node ids are already integers 0..n.
        #[serde(default)]
        dense_ids: bool,
    },
    Periodic(PeriodicSpec),
}

impl DataSource {
    /// Load or generate the stream; generated data is seeded by `seed`.
    pub fn load(&self, seed: u64) -> Result<TemporalGraph> {
        match self {
            DataSource::Csv { path, directed, dense_ids } => {
                let opts = IngestOptions { dense_ids: *dense_ids, graph: GraphOptions { directed: *directed, ..Default::default() }, ..Default::default() };
                ingest_csv(BufReader::new(File::open(path)?), &opts)
            }
            DataSource::Periodic(spec) => gen_periodic_bipartite(spec, &mut rng(seed)),
        }
    }
}

fn d_train() -> f64 {
    0.7
}
fn d_hold() -> f64 {
    0.15
}
fn d_mask() -> f64 {
    0.1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "d_train")]
    pub train: f64,
    #[serde(default = "d_hold")]
    pub val: f64,
    #[serde(default = "d_hold")]
    pub test: f64,
    /// Fraction of nodes held out for inductive evaluation.
    #[serde(default = "d_mask")]
    pub mask_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train: d_train(), val: d_hold(), test: d_hold(), mask_fraction: d_mask() }
    }
}

impl SplitConfig {
    pub fn apply(&self, g: &TemporalGraph, seed: u64) -> Result<DataSplit> {
        chronological_split(g, (self.train, self.val, self.test), self.mask_fraction, seed)
    }
}

fn d_batch() -> usize {
    200
}
fn d_epochs() -> usize {
    50
}
fn d_patience() -> usize {
    5
}
fn d_plateau_decay() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    #[serde(default)]
    pub adam: Adam,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    /// Epochs without a validation-AP improvement before stopping.
    #[serde(default = "d_patience")]
    pub patience: usize,
    /// Learning-rate factor applied after each epoch without a validation-AP improvement.
    #[serde(default = "d_plateau_decay")]
    pub plateau_decay: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig { adam: Adam::default(), batch_size: d_batch(), epochs: d_epochs(), patience: d_patience(), plateau_decay: d_plateau_decay() }
    }
}

/// Everything that determines a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub model: RtrConfig,
    #[serde(default)]
    pub optim: OptimConfig,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.optim.batch_size == 0 || self.optim.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be at least 1".into()));
        }
        if !(self.optim.plateau_decay > 0.0 && self.optim.plateau_decay <= 1.0) {
            return Err(Error::Config("plateau_decay must be in (0, 1]".into()));
        }
        let a = self.optim.adam;
        if !(a.lr > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return Err(Error::Config("adam needs lr > 0, betas in [0, 1), eps > 0".into()));
        }
        Ok(())
    }
}

/// Independent random streams derived from the run seed.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Stream {
    Data = 1,
    Split = 2,
    Init = 3,
    TrainNegatives = 4,
    EvalNegatives = 5,
}

pub(crate) fn stream_seed(seed: u64, s: Stream) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(s as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApAuc {
    pub ap: f64,
    pub auc: f64,
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    pub val: ApAuc,
    pub seconds: f64,
}

/// Test-set metrics; a mode is `None` when it has no scorable events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub transductive: Option<ApAuc>,
    pub inductive: Option<ApAuc>,
}

impl EvalReport {
    pub fn mode(&self, m: EvalMode) -> Option<ApAuc> {
        match m {
            EvalMode::Transductive => self.transductive,
            EvalMode::Inductive => self.inductive,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub transductive: Option<ApAuc>,
    pub inductive: Option<ApAuc>,
    pub epochs: Vec<EpochReport>,
    pub best_epoch: usize,
    /// Loss function and optimizer, recorded for the run manifest.
    pub objective: String,
}

/// Positive and negative scores collected while replaying a span of events.
#[derive(Default)]
struct Scored {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl Scored {
    fn push(&mut self, pos: f64, neg: f64) {
        self.scores.extend([pos, neg]);
        self.labels.extend([true, false]);
    }

    fn summary(&self) -> Result<Option<ApAuc>> {
        if self.labels.is_empty() {
            return Ok(None);
        }
        Ok(Some(ApAuc { ap: average_precision(&self.scores, &self.labels)?, auc: roc_auc(&self.scores, &self.labels)?, pairs: self.labels.len() / 2 }))
    }
}

/// Negative pools for both modes, built once per split.
struct Pools {
    transductive: Vec<NodeId>,
    inductive: Vec<NodeId>,
}

impl Pools {
    fn new(g: &TemporalGraph, split: &DataSplit) -> Self {
        Pools { transductive: candidate_pool(g, split, EvalMode::Transductive), inductive: candidate_pool(g, split, EvalMode::Inductive) }
    }

    fn get(&self, m: EvalMode) -> &[NodeId] {
        match m {
            EvalMode::Transductive => &self.transductive,
            EvalMode::Inductive => &self.inductive,
        }
    }
}

/// Replay `events` in batches, scoring each batch from the pre-batch state before committing it.
/// `modes` selects which events are scored and against which pool; parameters are never touched.
fn replay_scoring<R: Rng>(
    model: &mut RtrModel,
    events: &[&Event],
    batch: usize,
    split: &DataSplit,
    pools: &Pools,
    modes: &[EvalMode],
    rng: &mut R,
) -> Result<Vec<Scored>> {
    let mut out: Vec<Scored> = modes.iter().map(|_| Scored::default()).collect();
    for chunk in events.chunks(batch) {
        for (mi, &mode) in modes.iter().enumerate() {
            let pool = pools.get(mode);
            let scored: Vec<&Event> = chunk.iter().copied().filter(|e| split.scored_in(e, mode)).collect();
            if scored.is_empty() || pool.len() < 2 {
                continue;
            }
            let negs = sample_negatives(&scored, pool, rng)?;
            for (e, &n) in scored.iter().zip(&negs) {
                let s = model.score_links(e.src, &[e.dst, n], e.time, e.seq)?;
                out[mi].push(s[0], s[1]);
            }
        }
        model.apply_batch(chunk)?;
    }
    Ok(out)
}

fn replay(model: &mut RtrModel, events: &[&Event], batch: usize) -> Result<()> {
    for chunk in events.chunks(batch) {
        model.apply_batch(chunk)?;
    }
    Ok(())
}

/// One pass of gradient steps over the training events; returns the mean per-event loss.
fn train_epoch<R: Rng>(model: &mut RtrModel, events: &[&Event], opt: &OptimConfig, pool: &[NodeId], rng: &mut R) -> Result<f64> {
    let (mut total, mut count) = (0.0, 0usize);
    for chunk in events.chunks(opt.batch_size) {
        let negs = sample_negatives(chunk, pool, rng)?;
        let mut grads = Vec::with_capacity(chunk.len());
        for (e, &n) in chunk.iter().zip(&negs) {
            let mut tape = Tape::new(model.params());
            let (loss, _, _) = model.event_loss(&mut tape, e, n)?;
            let l = tape.scalar(loss);
            if !l.is_finite() {
                return Err(Error::Divergence(format!("non-finite loss {l} at event (t={}, s={})", e.time, e.seq)));
            }
            total += l;
            count += 1;
            grads.push(tape.backward(loss)?);
        }
        let w = 1.0 / chunk.len() as f64;
        for g in &grads {
            model.params_mut().accumulate(g, w);
        }
        opt.adam.step(model.params_mut());
        model.apply_batch(chunk)?;
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Fresh model sized for `g`; encoder scales come from the training events.
pub fn init_model(cfg: &RunConfig, g: &TemporalGraph, split: &DataSplit) -> Result<RtrModel> {
    let train = split.train_events(g);
    let shape = ModelShape::fit(g.num_nodes(), g.edge_dim(), &train);
    RtrModel::new(cfg.model.clone(), shape, stream_seed(cfg.seed, Stream::Init))
}

/// Train with early stopping on validation AP; returns the best-epoch model (state replayed
/// through train and validation) and the report with test metrics filled in.
pub fn train(cfg: &RunConfig, g: &TemporalGraph, split: &DataSplit) -> Result<(RtrModel, MetricsReport)> {
    cfg.validate()?;
    let mut model = init_model(cfg, g, split)?;
    let train_ev = split.train_events(g);
    let val_ev = split.val_events(g);
    if train_ev.is_empty() || val_ev.is_empty() {
        return Err(Error::Validation("train and validation splits must be non-empty".into()));
    }
    let pools = Pools::new(g, split);
    if pools.transductive.len() < 2 {
        return Err(Error::Validation("fewer than two transductive negative candidates".into()));
    }
    let mut neg_rng = rng(stream_seed(cfg.seed, Stream::TrainNegatives));
    let (mut best, mut best_ap, mut best_epoch, mut stale) = (model.params().clone(), f64::NEG_INFINITY, 0, 0);
    let mut epochs = Vec::new();
    let mut optim = cfg.optim;
    for epoch in 1..=cfg.optim.epochs {
        let start = Instant::now();
        model.reset_state();
        let train_loss = train_epoch(&mut model, &train_ev, &optim, &pools.transductive, &mut neg_rng)?;
        let mut val_rng = rng(stream_seed(cfg.seed, Stream::EvalNegatives));
        let scored = replay_scoring(&mut model, &val_ev, cfg.optim.batch_size, split, &pools, &[EvalMode::Transductive], &mut val_rng)?;
        let val = scored[0].summary()?.ok_or_else(|| Error::Validation("no scorable validation events".into()))?;
        epochs.push(EpochReport { epoch, train_loss, val, seconds: start.elapsed().as_secs_f64() });
        if val.ap > best_ap {
            (best, best_ap, best_epoch, stale) = (model.params().clone(), val.ap, epoch, 0);
        } else {
            stale += 1;
            if stale >= cfg.optim.patience {
                break;
            }
            optim.adam.lr *= optim.plateau_decay;
        }
    }
    *model.params_mut() = best;
    let eval = evaluate(&mut model, g, split, cfg.optim.batch_size, cfg.seed)?;
    let report = MetricsReport {
        transductive: eval.transductive,
        inductive: eval.inductive,
        epochs,
        best_epoch,
        objective: "binary cross-entropy on one sampled negative per event; Adam".into(),
    };
    Ok((model, report))
}

/// Reset state, replay train and validation events, then score the test span in both modes.
/// Parameters are read-only; the replay state is left at the end of the stream.
pub fn evaluate(model: &mut RtrModel, g: &TemporalGraph, split: &DataSplit, batch: usize, seed: u64) -> Result<EvalReport> {
    if split.test.is_empty() {
        return Err(Error::Validation("empty test split".into()));
    }
    if batch == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let pools = Pools::new(g, split);
    model.reset_state();
    replay(model, &split.train_events(g), batch)?;
    replay(model, &split.val_events(g), batch)?;
    let mut r = rng(stream_seed(seed, Stream::EvalNegatives).wrapping_add(1));
    let modes = [EvalMode::Transductive, EvalMode::Inductive];
    let scored = replay_scoring(model, &split.test_events(g), batch, split, &pools, &modes, &mut r)?;
    Ok(EvalReport { transductive: scored[0].summary()?, inductive: scored[1].summary()? })
}

/// Load data and split as the config says.
pub fn prepare(cfg: &RunConfig) -> Result<(TemporalGraph, DataSplit)> {
    let g = cfg.data.load(stream_seed(cfg.seed, Stream::Data))?;
    let split = cfg.split.apply(&g, stream_seed(cfg.seed, Stream::Split))?;
    Ok((g, split))
}

/// Test AP/AUC of a lookup-table predictor for periodic data: score(u, v) is the training-set
/// frequency of item v at u's cycle position. Serves as the learnable ceiling.
pub fn periodic_table_oracle(g: &TemporalGraph, split: &DataSplit, period: usize, seed: u64) -> Result<EvalReport> {
    if period == 0 {
        return Err(Error::Config("period must be at least 1".into()));
    }
    let n = g.num_nodes();
    let cell = |u: NodeId, phase: usize, v: NodeId| (u as usize * period + phase) * n + v as usize;
    let mut count = vec![0usize; n];
    let phase: Vec<usize> = g
        .events()
        .iter()
        .map(|e| {
            count[e.src as usize] += 1;
            (count[e.src as usize] - 1) % period
        })
        .collect();
    let mut table = vec![0u32; n * period * n];
    for (i, e) in g.events().iter().enumerate().take(split.train.end) {
        if !split.is_masked(e.src) && !split.is_masked(e.dst) {
            table[cell(e.src, phase[i], e.dst)] += 1;
        }
    }
    let pools = Pools::new(g, split);
    let mut r = rng(stream_seed(seed, Stream::EvalNegatives).wrapping_add(1));
    let modes = [EvalMode::Transductive, EvalMode::Inductive];
    let mut out: Vec<Scored> = modes.iter().map(|_| Scored::default()).collect();
    let test: Vec<usize> = split.test.clone().collect();
    for chunk in test.chunks(200) {
        for (mi, &mode) in modes.iter().enumerate() {
            let idx: Vec<usize> = chunk.iter().copied().filter(|&i| split.scored_in(&g.events()[i], mode)).collect();
            let pool = pools.get(mode);
            if idx.is_empty() || pool.len() < 2 {
                continue;
            }
            let evs: Vec<&Event> = idx.iter().map(|&i| &g.events()[i]).collect();
            let negs = sample_negatives(&evs, pool, &mut r)?;
            for ((&i, e), &v) in idx.iter().zip(&evs).zip(&negs) {
                out[mi].push(table[cell(e.src, phase[i], e.dst)] as f64, table[cell(e.src, phase[i], v)] as f64);
            }
        }
    }
    Ok(EvalReport { transductive: out[0].summary()?, inductive: out[1].summary()? })
}
