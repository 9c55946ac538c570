//! Event-stream data model: events, temporal graphs, neighbor indexing,
//! chronological splits and negative sampling.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::io::{Read, Write};
use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = u32;

/// One timed interaction. `seq` is the global ordinal after stable sorting by time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub src: NodeId,
    pub dst: NodeId,
    pub time: f64,
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edge_feat: Vec<f64>,
}

impl Event {
    pub fn new(src: NodeId, dst: NodeId, time: f64, seq: u64) -> Self {
        Event { src, dst, time, seq, edge_feat: Vec::new() }
    }

    /// (time, seq) ordering key.
    pub fn key(&self) -> (f64, u64) {
        (self.time, self.seq)
    }
}

pub(crate) fn key_lt(a: (f64, u64), b: (f64, u64)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// An event before sequence numbers are assigned.
#[derive(Clone, Debug, PartialEq)]
pub struct RawEvent {
    pub src: NodeId,
    pub dst: NodeId,
    pub time: f64,
    pub edge_feat: Vec<f64>,
}

impl RawEvent {
    pub fn new(src: NodeId, dst: NodeId, time: f64) -> Self {
        RawEvent { src, dst, time, edge_feat: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphOptions {
    /// Bipartite/directed datasets: negatives are drawn from destination-side nodes.
    /// Both endpoints are still indexed for neighbor queries.
    #[serde(default)]
    pub directed: bool,
    #[serde(default)]
    pub allow_self_loops: bool,
}

#[derive(Clone, Debug)]
pub struct TemporalGraph {
    events: Vec<Event>,
    num_nodes: usize,
    edge_dim: usize,
    opts: GraphOptions,
    labels: Vec<String>,
    adj: Vec<Vec<usize>>,
}

impl PartialEq for TemporalGraph {
    fn eq(&self, other: &Self) -> bool {
        self.events == other.events && self.num_nodes == other.num_nodes && self.edge_dim == other.edge_dim && self.opts == other.opts
    }
}

impl TemporalGraph {
    /// Build from unsorted records. Records are stably sorted by time; seq is the
    /// resulting position, so ties keep input order.
    pub fn from_records(num_nodes: usize, mut raw: Vec<RawEvent>, opts: GraphOptions) -> Result<Self> {
        let edge_dim = raw.first().map_or(0, |r| r.edge_feat.len());
        for (i, r) in raw.iter().enumerate() {
            if !r.time.is_finite() || r.time < 0.0 {
                return Err(Error::Validation(format!("event {i}: time {} must be finite and non-negative", r.time)));
            }
            if r.edge_feat.len() != edge_dim {
                return Err(Error::Validation(format!("event {i}: {} edge features, expected {edge_dim}", r.edge_feat.len())));
            }
            if r.src as usize >= num_nodes || r.dst as usize >= num_nodes {
                return Err(Error::Validation(format!("event {i}: node id out of range 0..{num_nodes}")));
            }
            if r.src == r.dst && !opts.allow_self_loops {
                return Err(Error::Validation(format!("event {i}: self-loop on node {} (disabled)", r.src)));
            }
        }
        raw.sort_by(|a, b| a.time.total_cmp(&b.time));
        let events = raw.into_iter().enumerate().map(|(i, r)| Event { src: r.src, dst: r.dst, time: r.time, seq: i as u64, edge_feat: r.edge_feat }).collect();
        Ok(Self::assemble(events, num_nodes, edge_dim, opts, None))
    }

    /// Build from events that already carry a valid (time, seq) order.
    pub fn from_events(num_nodes: usize, events: Vec<Event>, opts: GraphOptions) -> Result<Self> {
        let edge_dim = events.first().map_or(0, |e| e.edge_feat.len());
        for (i, w) in events.windows(2).enumerate() {
            if !key_lt(w[0].key(), w[1].key()) {
                return Err(Error::Validation(format!("events {i},{} not strictly ordered by (time, seq)", i + 1)));
            }
        }
        for (i, e) in events.iter().enumerate() {
            if !e.time.is_finite() || e.time < 0.0 {
                return Err(Error::Validation(format!("event {i}: bad time {}", e.time)));
            }
            if e.edge_feat.len() != edge_dim {
                return Err(Error::Validation(format!("event {i}: edge feature arity mismatch")));
            }
            if e.src as usize >= num_nodes || e.dst as usize >= num_nodes {
                return Err(Error::Validation(format!("event {i}: node id out of range 0..{num_nodes}")));
            }
            if e.src == e.dst && !opts.allow_self_loops {
                return Err(Error::Validation(format!("event {i}: self-loop on node {} (disabled)", e.src)));
            }
        }
        Ok(Self::assemble(events, num_nodes, edge_dim, opts, None))
    }

    fn assemble(events: Vec<Event>, num_nodes: usize, edge_dim: usize, opts: GraphOptions, labels: Option<Vec<String>>) -> Self {
        let mut adj = vec![Vec::new(); num_nodes];
        for (i, e) in events.iter().enumerate() {
            adj[e.src as usize].push(i);
            if e.dst != e.src {
                adj[e.dst as usize].push(i);
            }
        }
        let labels = labels.unwrap_or_else(|| (0..num_nodes).map(|i| i.to_string()).collect());
        TemporalGraph { events, num_nodes, edge_dim, opts, labels, adj }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_dim
    }

    pub fn options(&self) -> GraphOptions {
        self.opts
    }

    pub fn is_directed(&self) -> bool {
        self.opts.directed
    }

    /// Original identifier of each dense node id.
    pub fn node_labels(&self) -> &[String] {
        &self.labels
    }

    /// Distinct event timestamps in increasing order.
    pub fn timestamps(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.events.iter().map(|e| e.time).collect();
        ts.dedup();
        ts
    }

    /// Event indices touching `u`, in (time, seq) order.
    pub fn incident(&self, u: NodeId) -> &[usize] {
        self.adj.get(u as usize).map_or(&[], |v| v.as_slice())
    }

    /// Up to `d` most recent interactions of `u` strictly before time `t`, oldest first.
    pub fn recent_neighbors(&self, u: NodeId, t: f64, d: usize) -> Vec<NeighborEntry> {
        let inc = self.incident(u);
        let end = inc.partition_point(|&i| self.events[i].time < t);
        inc[end.saturating_sub(d)..end].iter().map(|&i| NeighborEntry::from_event(&self.events[i], u)).collect()
    }

    /// Same events, node ids mapped through `perm` (perm[old] = new).
    pub fn relabel(&self, perm: &[NodeId]) -> Result<Self> {
        if perm.len() != self.num_nodes {
            return Err(Error::Validation(format!("permutation length {} != {} nodes", perm.len(), self.num_nodes)));
        }
        let mut seen = vec![false; self.num_nodes];
        for &p in perm {
            if p as usize >= self.num_nodes || std::mem::replace(&mut seen[p as usize], true) {
                return Err(Error::Validation("not a permutation".into()));
            }
        }
        let events = self.events.iter().map(|e| Event { src: perm[e.src as usize], dst: perm[e.dst as usize], ..e.clone() }).collect();
        let mut labels = vec![String::new(); self.num_nodes];
        for (old, &new) in perm.iter().enumerate() {
            labels[new as usize] = self.labels[old].clone();
        }
        Ok(Self::assemble(events, self.num_nodes, self.edge_dim, self.opts, Some(labels)))
    }

    /// Prefix of the stream (events `0..n`), same node set.
    pub fn prefix(&self, n: usize) -> Self {
        let events = self.events[..n.min(self.events.len())].to_vec();
        Self::assemble(events, self.num_nodes, self.edge_dim, self.opts, Some(self.labels.clone()))
    }

    /// Write `src,dst,time[,f0..]` CSV using dense ids.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["src".to_string(), "dst".to_string(), "time".to_string()];
        header.extend((0..self.edge_dim).map(|i| format!("f{i}")));
        out.write_record(&header).map_err(csv_io)?;
        for e in &self.events {
            let mut rec = vec![e.src.to_string(), e.dst.to_string(), fmt_f64(e.time)];
            rec.extend(e.edge_feat.iter().map(|&f| fmt_f64(f)));
            out.write_record(&rec).map_err(csv_io)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Shortest decimal that round-trips exactly.
fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Keep integer ids as-is instead of remapping by first appearance.
    #[serde(default)]
    pub dense_ids: bool,
    /// Node count override (dense mode only); must cover every id.
    #[serde(default)]
    pub num_nodes: Option<usize>,
    #[serde(default)]
    pub graph: GraphOptions,
}

/// Parse a `src,dst,time[,f0,f1,...]` CSV stream.
pub fn ingest_csv<R: Read>(reader: R, opts: &IngestOptions) -> Result<TemporalGraph> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?.clone();
    if header.len() < 3 || &header[0] != "src" || &header[1] != "dst" || &header[2] != "time" {
        return Err(Error::Parse { line: 1, msg: "header must start with src,dst,time".into() });
    }
    let arity = header.len() - 3;
    let mut ids: HashMap<String, NodeId> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut raw = Vec::new();
    let mut max_dense: Option<u64> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line() as usize), msg: e.to_string() })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let perr = |msg: String| Error::Parse { line, msg };
        if rec.len() != header.len() {
            return Err(perr(format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let mut node = |s: &str| -> Result<NodeId> {
            if opts.dense_ids {
                let v: u64 = s.parse().map_err(|_| perr(format!("node id {s:?} is not a non-negative integer")))?;
                if v > u32::MAX as u64 {
                    return Err(perr(format!("node id {v} too large")));
                }
                max_dense = Some(max_dense.map_or(v, |m| m.max(v)));
                Ok(v as NodeId)
            } else if let Some(&id) = ids.get(s) {
                Ok(id)
            } else {
                let id = labels.len() as NodeId;
                ids.insert(s.to_string(), id);
                labels.push(s.to_string());
                Ok(id)
            }
        };
        let src = node(&rec[0])?;
        let dst = node(&rec[1])?;
        let time: f64 = rec[2].parse().map_err(|_| perr(format!("time {:?} is not a number", &rec[2])))?;
        if !time.is_finite() {
            return Err(perr(format!("time {time} is not finite")));
        }
        if time < 0.0 {
            return Err(Error::Validation(format!("line {line}: negative time {time}")));
        }
        let mut edge_feat = Vec::with_capacity(arity);
        for f in rec.iter().skip(3) {
            edge_feat.push(f.parse().map_err(|_| perr(format!("feature {f:?} is not a number")))?);
        }
        if src == dst && !opts.graph.allow_self_loops {
            return Err(Error::Validation(format!("line {line}: self-loop (disabled)")));
        }
        raw.push(RawEvent { src, dst, time, edge_feat });
    }
    let num_nodes = if opts.dense_ids {
        let needed = max_dense.map_or(0, |m| m as usize + 1);
        match opts.num_nodes {
            Some(n) if n < needed => return Err(Error::Validation(format!("num_nodes {n} < max id + 1 = {needed}"))),
            Some(n) => n,
            None => needed,
        }
    } else {
        labels.len()
    };
    let mut g = TemporalGraph::from_records(num_nodes, raw, opts.graph)?;
    if !opts.dense_ids {
        g.labels = labels;
    }
    g.edge_dim = arity;
    Ok(g)
}

/// One entry of a node's interaction history, as seen from that node.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborEntry {
    pub node: NodeId,
    pub time: f64,
    pub seq: u64,
    pub edge_feat: Vec<f64>,
}

impl NeighborEntry {
    fn from_event(e: &Event, me: NodeId) -> Self {
        let node = if e.src == me { e.dst } else { e.src };
        NeighborEntry { node, time: e.time, seq: e.seq, edge_feat: e.edge_feat.clone() }
    }
}

/// Per-node bounded history of the most recent interactions.
///
/// Besides the `cap` most recent entries older than the node's latest timestamp,
/// all entries sharing the latest timestamp are retained, so a query at that
/// timestamp (which excludes them) still sees a full window.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborStore {
    cap: usize,
    lists: Vec<VecDeque<NeighborEntry>>,
}

impl NeighborStore {
    pub fn new(num_nodes: usize, cap: usize) -> Self {
        NeighborStore { cap, lists: vec![VecDeque::new(); num_nodes] }
    }

    pub fn capacity(&self) -> usize {
        self.cap
    }

    pub fn num_nodes(&self) -> usize {
        self.lists.len()
    }

    pub fn clear(&mut self) {
        self.lists.iter_mut().for_each(VecDeque::clear);
    }

    fn list_mut(&mut self, u: NodeId) -> &mut VecDeque<NeighborEntry> {
        let u = u as usize;
        if u >= self.lists.len() {
            self.lists.resize(u + 1, VecDeque::new());
        }
        &mut self.lists[u]
    }

    pub fn insert(&mut self, e: &Event) -> Result<()> {
        let ends: &[NodeId] = if e.src == e.dst { &[e.src] } else { &[e.src, e.dst] };
        for &me in ends {
            if let Some(last) = self.lists.get(me as usize).and_then(|l| l.back()) {
                if key_lt(e.key(), (last.time, last.seq)) {
                    return Err(Error::Causality(format!(
                        "event (t={}, s={}) older than node {me}'s last entry (t={}, s={})",
                        e.time, e.seq, last.time, last.seq
                    )));
                }
            }
        }
        let cap = self.cap;
        for &me in ends {
            let list = self.list_mut(me);
            list.push_back(NeighborEntry::from_event(e, me));
            let latest = e.time;
            let at_latest = list.iter().rev().take_while(|x| x.time == latest).count();
            let mut older = list.len() - at_latest;
            while older > cap {
                list.pop_front();
                older -= 1;
            }
        }
        Ok(())
    }

    /// Up to `cap` most recent entries with time < t, oldest first.
    pub fn recent(&self, u: NodeId, t: f64) -> Result<Vec<&NeighborEntry>> {
        let Some(list) = self.lists.get(u as usize) else {
            return Ok(Vec::new());
        };
        if let Some(last) = list.back() {
            if t < last.time {
                return Err(Error::Causality(format!("query for node {u} at t={t} precedes stored entry at t={}", last.time)));
            }
        }
        let end = list.partition_point(|x| x.time < t);
        Ok(list.range(end.saturating_sub(self.cap)..end).collect())
    }

    /// Raw retained entries (checkpointing).
    pub fn entries(&self, u: NodeId) -> impl Iterator<Item = &NeighborEntry> {
        self.lists.get(u as usize).into_iter().flatten()
    }

    pub(crate) fn restore(cap: usize, lists: Vec<Vec<NeighborEntry>>) -> Self {
        NeighborStore { cap, lists: lists.into_iter().map(VecDeque::from).collect() }
    }
}

/// Chronological train/val/test event ranges plus the inductive hold-out node set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "SplitManifest", try_from = "SplitManifest")]
pub struct DataSplit {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
    pub masked_nodes: BTreeSet<NodeId>,
}

#[derive(Serialize, Deserialize)]
struct SplitManifest {
    train: [usize; 2],
    val: [usize; 2],
    test: [usize; 2],
    masked_nodes: Vec<NodeId>,
}

impl From<DataSplit> for SplitManifest {
    fn from(s: DataSplit) -> Self {
        SplitManifest {
            train: [s.train.start, s.train.end],
            val: [s.val.start, s.val.end],
            test: [s.test.start, s.test.end],
            masked_nodes: s.masked_nodes.into_iter().collect(),
        }
    }
}

impl TryFrom<SplitManifest> for DataSplit {
    type Error = String;
    fn try_from(m: SplitManifest) -> std::result::Result<Self, String> {
        let ok = m.train[0] <= m.train[1] && m.train[1] == m.val[0] && m.val[0] <= m.val[1] && m.val[1] == m.test[0] && m.test[0] <= m.test[1];
        if !ok {
            return Err("split ranges must be contiguous and ordered".into());
        }
        Ok(DataSplit { train: m.train[0]..m.train[1], val: m.val[0]..m.val[1], test: m.test[0]..m.test[1], masked_nodes: m.masked_nodes.into_iter().collect() })
    }
}

impl DataSplit {
    pub fn is_masked(&self, u: NodeId) -> bool {
        self.masked_nodes.contains(&u)
    }

    fn touches_mask(&self, e: &Event) -> bool {
        self.is_masked(e.src) || self.is_masked(e.dst)
    }

    /// Train events with masked-node events removed.
    pub fn train_events<'g>(&self, g: &'g TemporalGraph) -> Vec<&'g Event> {
        g.events()[self.train.clone()].iter().filter(|e| !self.touches_mask(e)).collect()
    }

    /// Validation events with masked-node events removed.
    pub fn val_events<'g>(&self, g: &'g TemporalGraph) -> Vec<&'g Event> {
        g.events()[self.val.clone()].iter().filter(|e| !self.touches_mask(e)).collect()
    }

    /// All test events, including those between masked nodes.
    pub fn test_events<'g>(&self, g: &'g TemporalGraph) -> Vec<&'g Event> {
        g.events()[self.test.clone()].iter().collect()
    }

    /// Whether a test event is scored under `mode`.
    pub fn scored_in(&self, e: &Event, mode: EvalMode) -> bool {
        match mode {
            EvalMode::Transductive => !self.touches_mask(e),
            EvalMode::Inductive => self.touches_mask(e),
        }
    }
}

/// Split by event count; mask `mask_fraction` of the nodes, drawn uniformly without replacement.
pub fn chronological_split(g: &TemporalGraph, ratios: (f64, f64, f64), mask_fraction: f64, seed: u64) -> Result<DataSplit> {
    let (a, b, c) = ratios;
    if [a, b, c].iter().any(|r| !(0.0..=1.0).contains(r)) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!("split ratios {ratios:?} must be in [0,1] and sum to 1")));
    }
    if !(0.0..1.0).contains(&mask_fraction) {
        return Err(Error::Validation(format!("mask_fraction {mask_fraction} outside [0,1)")));
    }
    let n = g.num_events();
    let t_end = (a * n as f64).round() as usize;
    let v_end = (((a + b) * n as f64).round() as usize).max(t_end);
    if t_end == 0 || v_end == t_end || v_end >= n {
        return Err(Error::Validation(format!("{n} events are too few for non-empty train/val/test splits")));
    }
    let k = (mask_fraction * g.num_nodes() as f64).floor() as usize;
    let mut rng = crate::harness::rng(seed);
    let masked_nodes = rand::seq::index::sample(&mut rng, g.num_nodes(), k).into_iter().map(|i| i as NodeId).collect();
    Ok(DataSplit { train: 0..t_end, val: t_end..v_end, test: v_end..n, masked_nodes })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Transductive,
    Inductive,
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EvalMode::Transductive => "transductive",
            EvalMode::Inductive => "inductive",
        })
    }
}

impl std::str::FromStr for EvalMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transductive" => Ok(EvalMode::Transductive),
            "inductive" => Ok(EvalMode::Inductive),
            _ => Err(Error::Config(format!("unknown mode {s:?} (transductive|inductive)"))),
        }
    }
}

/// Sorted negative-candidate pool for a mode: unmasked nodes (transductive) or
/// masked nodes (inductive), restricted to destination-side nodes on directed graphs.
pub fn candidate_pool(g: &TemporalGraph, split: &DataSplit, mode: EvalMode) -> Vec<NodeId> {
    let mut is_dst = vec![!g.is_directed(); g.num_nodes()];
    if g.is_directed() {
        for e in g.events() {
            is_dst[e.dst as usize] = true;
        }
    }
    (0..g.num_nodes() as NodeId).filter(|&u| is_dst[u as usize]).filter(|&u| split.is_masked(u) == (mode == EvalMode::Inductive)).collect()
}

/// One negative destination per positive, uniform over `pool` minus the positive's destination.
/// `pool` must be sorted ascending.
pub fn sample_negatives<R: Rng>(batch: &[&Event], pool: &[NodeId], rng: &mut R) -> Result<Vec<NodeId>> {
    if pool.is_empty() {
        return Err(Error::Config("empty negative candidate pool".into()));
    }
    debug_assert!(pool.windows(2).all(|w| w[0] < w[1]));
    batch
        .iter()
        .map(|e| match pool.binary_search(&e.dst) {
            Ok(_) if pool.len() == 1 => Err(Error::Config(format!("candidate pool holds only the positive destination {}", e.dst))),
            Ok(pos) => {
                let i = rng.random_range(0..pool.len() - 1);
                Ok(pool[if i >= pos { i + 1 } else { i }])
            }
            Err(_) => Ok(pool[rng.random_range(0..pool.len())]),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_graph(times: &[f64]) -> TemporalGraph {
        let raw = times.iter().map(|&t| RawEvent::new(0, 1, t)).collect();
        TemporalGraph::from_records(2, raw, GraphOptions::default()).unwrap()
    }

    #[test]
    fn ties_keep_input_order() {
        let csv = "src,dst,time\na,b,1.0\nc,d,1.0\na,c,2.0\n";
        let g = ingest_csv(csv.as_bytes(), &IngestOptions::default()).unwrap();
        let seqs: Vec<u64> = g.events().iter().map(|e| e.seq).collect();
        assert_eq!(seqs, vec![0, 1, 2]);
        assert_eq!((g.events()[1].src, g.events()[1].dst), (2, 3));
        assert_eq!(g.node_labels(), &["a", "b", "c", "d"]);
    }

    #[test]
    fn unsorted_input_is_stably_sorted() {
        let csv = "src,dst,time\n0,1,3\n1,2,1\n2,0,1\n";
        let g = ingest_csv(csv.as_bytes(), &IngestOptions { dense_ids: true, ..Default::default() }).unwrap();
        let order: Vec<(u32, u32)> = g.events().iter().map(|e| (e.src, e.dst)).collect();
        assert_eq!(order, vec![(1, 2), (2, 0), (0, 1)]);
    }

    #[test]
    fn empty_stream() {
        let g = ingest_csv("src,dst,time\n".as_bytes(), &IngestOptions::default()).unwrap();
        assert_eq!((g.num_events(), g.num_nodes()), (0, 0));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = ingest_csv("src,dst,time\n0,1,1\n0,1,abc\n".as_bytes(), &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = ingest_csv("src,dst,time\n0,1,-1\n".as_bytes(), &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let err = ingest_csv("src,dst,time,f0\n0,1,1,0.5\n0,1\n".as_bytes(), &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn features_parse_and_round_trip() {
        let csv = "src,dst,time,f0,f1\nx,y,0.5,1.5,-2\ny,z,0.75,0.1,0\n";
        let g = ingest_csv(csv.as_bytes(), &IngestOptions::default()).unwrap();
        assert_eq!(g.edge_dim(), 2);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let h = ingest_csv(buf.as_slice(), &IngestOptions { dense_ids: true, ..Default::default() }).unwrap();
        assert_eq!(g.events(), h.events());
    }

    #[test]
    fn self_loops_rejected_unless_enabled() {
        assert!(TemporalGraph::from_records(1, vec![RawEvent::new(0, 0, 1.0)], GraphOptions::default()).is_err());
        let opts = GraphOptions { allow_self_loops: true, ..Default::default() };
        assert!(TemporalGraph::from_records(1, vec![RawEvent::new(0, 0, 1.0)], opts).is_ok());
    }

    #[test]
    fn recency_window_and_boundary() {
        let g = line_graph(&[1.0, 2.0, 3.0]);
        let ts = |v: Vec<NeighborEntry>| v.iter().map(|e| e.time).collect::<Vec<_>>();
        assert_eq!(ts(g.recent_neighbors(0, 10.0, 2)), vec![2.0, 3.0]);
        assert_eq!(ts(g.recent_neighbors(0, 3.0, 2)), vec![1.0, 2.0]);
        assert!(g.recent_neighbors(7, 3.0, 2).is_empty());
    }

    #[test]
    fn store_keeps_full_window_for_latest_timestamp_queries() {
        let mut s = NeighborStore::new(3, 2);
        let evs = [Event::new(0, 1, 1.0, 0), Event::new(0, 1, 2.0, 1), Event::new(0, 2, 3.0, 2), Event::new(0, 1, 3.0, 3)];
        for e in &evs {
            s.insert(e).unwrap();
        }
        let at3: Vec<f64> = s.recent(0, 3.0).unwrap().iter().map(|e| e.time).collect();
        assert_eq!(at3, vec![1.0, 2.0]);
        let later: Vec<f64> = s.recent(0, 4.0).unwrap().iter().map(|e| e.time).collect();
        assert_eq!(later, vec![3.0, 3.0]);
        assert!(s.recent(0, 2.5).is_err());
        assert!(s.insert(&Event::new(0, 1, 2.0, 9)).is_err());
    }

    #[test]
    fn split_arithmetic() {
        let g = line_graph(&(0..100).map(f64::from).collect::<Vec<_>>());
        let s = chronological_split(&g, (0.7, 0.15, 0.15), 0.0, 1).unwrap();
        assert_eq!((s.train.clone(), s.val.clone(), s.test.clone()), (0..70, 70..85, 85..100));
        assert!(s.masked_nodes.is_empty());
        assert_eq!(s.train_events(&g).len(), 70);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"train":[0,70],"val":[70,85],"test":[85,100],"masked_nodes":[]}"#);
        assert_eq!(serde_json::from_str::<DataSplit>(&json).unwrap(), s);
    }

    #[test]
    fn split_too_small() {
        let g = line_graph(&[1.0, 2.0]);
        assert!(matches!(chronological_split(&g, (0.7, 0.15, 0.15), 0.0, 1), Err(Error::Validation(_))));
    }

    #[test]
    fn singleton_inductive_pool_is_deterministic() {
        let e = Event::new(0, 1, 1.0, 0);
        let mut rng = crate::harness::rng(3);
        let negs = sample_negatives(&[&e, &e], &[5], &mut rng).unwrap();
        assert_eq!(negs, vec![5, 5]);
        assert!(sample_negatives(&[&e], &[], &mut rng).is_err());
        assert!(sample_negatives(&[&e], &[1], &mut rng).is_err());
    }
}
