use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{EventFeaturizer, FeatureConfig, PhiInput};
use crate::graph::{key_lt, Event, NeighborEntry, NodeId};
use crate::model::config::{Ablations, Aggregation, BaseMode, MultiEvent, RtrConfig};
use crate::model::state::ModelState;
use crate::nn::codec::{Reader, Writer};
use crate::nn::{GruCell, Init, Linear, MultiHeadAttention, ParamId, ParamStore, Tape, Var};

/// Sizes fixed by the data rather than by the config.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelShape {
    pub num_nodes: usize,
    pub edge_dim: usize,
    /// Typical time gap between a node's consecutive events (places the frequency grid).
    pub time_scale: f64,
    /// Typical sequence gap between a node's consecutive events.
    pub seq_scale: f64,
}

impl ModelShape {
    pub fn new(num_nodes: usize, edge_dim: usize) -> Self {
        ModelShape { num_nodes, edge_dim, time_scale: 1.0, seq_scale: 1.0 }
    }

    /// Median per-node inter-event gaps of `events`.
    pub fn fit(num_nodes: usize, edge_dim: usize, events: &[&Event]) -> Self {
        let mut last: Vec<Option<(f64, u64)>> = vec![None; num_nodes];
        let (mut dt, mut ds) = (Vec::new(), Vec::new());
        for e in events {
            for u in [e.src, e.dst] {
                if let Some((t, s)) = last[u as usize] {
                    dt.push(e.time - t);
                    ds.push((e.seq - s) as f64);
                }
                last[u as usize] = Some((e.time, e.seq));
            }
        }
        let median = |mut v: Vec<f64>| {
            v.retain(|x| *x > 0.0);
            if v.is_empty() {
                return 1.0;
            }
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        ModelShape { num_nodes, edge_dim, time_scale: median(dt), seq_scale: median(ds) }
    }
}

#[derive(Clone, Debug)]
enum Base {
    Implicit(GruCell),
    Explicit(ParamId),
}

#[derive(Clone, Debug)]
enum Level {
    Rtr { att: MultiHeadAttention, msg: GruCell, upd: GruCell },
    Classic { att: MultiHeadAttention, combine: Linear },
}

/// The RTR layer stack with its replay state and link decoder.
#[derive(Clone, Debug)]
pub struct RtrModel {
    cfg: RtrConfig,
    shape: ModelShape,
    params: ParamStore,
    phi: EventFeaturizer,
    base: Base,
    levels: Vec<Level>,
    dec: (Linear, Linear),
    node_feats: Vec<f64>,
    state: ModelState,
}

type Now = (f64, u64);

impl RtrModel {
    pub fn new(cfg: RtrConfig, shape: ModelShape, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = crate::harness::rng(seed);
        let mut p = ParamStore::new();
        let fcfg = FeatureConfig { time_dim: cfg.time_dim, seq_dim: cfg.seq_dim, edge_dim: shape.edge_dim, interaction_counts: cfg.interaction_counts };
        let phi = EventFeaturizer::new(&mut p, "phi", fcfg, shape.time_scale, shape.seq_scale)?;
        let pd = phi.dim();
        let (h, v) = (|k| cfg.hidden(k), |k| cfg.view(k));
        let base = match cfg.base_mode {
            BaseMode::Implicit => Base::Implicit(GruCell::new(&mut p, "base.gru", 2 * v(0) + pd, h(0), &mut rng)?),
            BaseMode::Explicit => Base::Explicit(p.register("base.embed", shape.num_nodes, h(0), Init::Uniform(0.1), &mut rng)?),
        };
        let mut levels = Vec::with_capacity(cfg.layers);
        for k in 1..=cfg.layers {
            let name = format!("l{k}");
            levels.push(match cfg.aggregation {
                Aggregation::Rtr => {
                    let row = 2 * h(k - 1) + v(k - 1) + pd + usize::from(cfg.hetero);
                    Level::Rtr {
                        att: MultiHeadAttention::new(&mut p, &format!("{name}.att"), row, h(k), h(k), cfg.heads, &mut rng)?,
                        msg: GruCell::new(&mut p, &format!("{name}.msg"), h(k) + v(k - 1) + pd, h(k - 1), &mut rng)?,
                        upd: GruCell::new(&mut p, &format!("{name}.upd"), h(k - 1), h(k), &mut rng)?,
                    }
                }
                Aggregation::Classic => Level::Classic {
                    att: MultiHeadAttention::new(&mut p, &format!("{name}.att"), v(k - 1) + pd, h(k), h(k), cfg.heads, &mut rng)?,
                    combine: Linear::new(&mut p, &format!("{name}.combine"), v(k - 1) + h(k), h(k), &mut rng)?,
                },
            });
        }
        let top = v(cfg.layers);
        let dh = cfg.decoder_width();
        let dec = (Linear::new(&mut p, "dec.0", 2 * top, dh, &mut rng)?, Linear::new(&mut p, "dec.1", dh, 1, &mut rng)?);
        let state = ModelState::new(shape.num_nodes, Self::state_dims(&cfg), cfg.neighbors);
        Ok(RtrModel { node_feats: vec![0.0; shape.num_nodes * cfg.node_feat_dim], cfg, shape, params: p, phi, base, levels, dec, state })
    }

    fn state_dims(cfg: &RtrConfig) -> Vec<usize> {
        let top = if cfg.aggregation == Aggregation::Rtr { cfg.layers } else { 0 };
        (0..=top).map(|k| cfg.hidden(k)).collect()
    }

    pub fn config(&self) -> &RtrConfig {
        &self.cfg
    }

    /// Same parameters and replay state under a different ablation set.
    pub fn with_ablations(&self, ablations: Ablations) -> Result<Self> {
        let cfg = RtrConfig { ablations, ..self.cfg.clone() };
        cfg.validate()?;
        Ok(RtrModel { cfg, ..self.clone() })
    }

    pub fn state_mut(&mut self) -> &mut ModelState {
        &mut self.state
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn featurizer(&self) -> &EventFeaturizer {
        &self.phi
    }

    pub fn embedding_dim(&self) -> usize {
        self.cfg.view(self.cfg.layers)
    }

    /// Zero all states and clear neighbor stores (epoch start).
    pub fn reset_state(&mut self) {
        self.state.reset();
    }

    /// Static node features, row-major `num_nodes × node_feat_dim`.
    pub fn set_node_features(&mut self, feats: Vec<f64>) -> Result<()> {
        let want = self.shape.num_nodes * self.cfg.node_feat_dim;
        if feats.len() != want {
            return Err(Error::Validation(format!("node features: {} values, expected {want}", feats.len())));
        }
        self.node_feats = feats;
        Ok(())
    }

    fn ctx<'c, 'p>(&self, t: &'c mut Tape<'p>) -> Ctx<'_, 'c, 'p> {
        Ctx { m: self, t, calls: 0, memo: HashMap::new() }
    }

    /// Prediction-time embedding of `u` at (t, s); never mutates state.
    pub fn embed(&self, u: NodeId, t: f64, s: u64) -> Result<Vec<f64>> {
        Ok(self.embed_counted(u, t, s)?.0)
    }

    /// Embedding plus the number of revision-attention invocations it took.
    pub fn embed_counted(&self, u: NodeId, t: f64, s: u64) -> Result<(Vec<f64>, u64)> {
        let mut tape = Tape::new(&self.params);
        let mut c = self.ctx(&mut tape);
        let v = c.embed(u, (t, s))?;
        Ok((c.t.value(v).to_vec(), c.calls))
    }

    /// Link probability σ(decoder(e_u, e_v)) at (t, s).
    pub fn score_link(&self, u: NodeId, v: NodeId, t: f64, s: u64) -> Result<f64> {
        Ok(self.score_links(u, &[v], t, s)?[0])
    }

    /// Probabilities for one source against several destinations.
    pub fn score_links(&self, u: NodeId, vs: &[NodeId], t: f64, s: u64) -> Result<Vec<f64>> {
        let mut tape = Tape::new(&self.params);
        let mut c = self.ctx(&mut tape);
        let eu = c.embed(u, (t, s))?;
        let mut out = Vec::with_capacity(vs.len());
        for &v in vs {
            let ev = c.embed(v, (t, s))?;
            let l = c.logit(eu, ev)?;
            out.push(crate::nn::tape::sigmoid(c.t.scalar(l)));
        }
        Ok(out)
    }

    /// Sum of the positive and negative BCE terms for one event, recorded on `t`.
    pub fn event_loss(&self, t: &mut Tape<'_>, e: &Event, neg: NodeId) -> Result<(Var, f64, f64)> {
        let mut c = self.ctx(t);
        (|| {
            let now = (e.time, e.seq);
            let eu = c.embed(e.src, now)?;
            let ev = c.embed(e.dst, now)?;
            let en = c.embed(neg, now)?;
            let lp = c.logit(eu, ev)?;
            let ln = c.logit(eu, en)?;
            let (sp, sn) = (c.t.scalar(lp), c.t.scalar(ln));
            let a = c.t.bce_logits(lp, 1.0)?;
            let b = c.t.bce_logits(ln, 0.0)?;
            Ok((c.t.add(a, b)?, sp, sn))
        })()
    }

    /// Revision input matrix Z of `u` at layer k (S = ∅) as of (t, s); `None` when u has no history.
    pub fn revision_matrix(&self, u: NodeId, k: usize, t: f64, s: u64) -> Result<Option<(usize, usize, Vec<f64>)>> {
        if k == 0 || k > self.cfg.layers {
            return Err(Error::Validation(format!("layer {k} outside 1..={}", self.cfg.layers)));
        }
        let mut tape = Tape::new(&self.params);
        let mut c = self.ctx(&mut tape);
        let z = match self.cfg.aggregation {
            Aggregation::Rtr => c.revision_rows(u, k, &mut Vec::new(), (t, s))?,
            Aggregation::Classic => c.classic_rows(u, k, (t, s), &mut HashMap::new())?,
        };
        Ok(z.map(|z| {
            let (r, cols) = c.t.shape(z);
            (r, cols, c.t.value(z).to_vec())
        }))
    }

    pub fn apply_event(&mut self, e: &Event) -> Result<()> {
        self.apply_batch(&[e])
    }

    /// Commit a chronologically ordered batch: layer by layer over all touched nodes,
    /// then the neighbor stores.
    pub fn apply_batch(&mut self, events: &[&Event]) -> Result<()> {
        let Some(first) = events.first() else { return Ok(()) };
        if let Some(last) = self.state.last {
            if !key_lt(last, first.key()) {
                return Err(Error::Causality(format!("event (t={}, s={}) does not follow committed (t={}, s={})", first.time, first.seq, last.0, last.1)));
            }
        }
        for w in events.windows(2) {
            if !key_lt(w[0].key(), w[1].key()) {
                return Err(Error::Causality("batch is not ordered by (time, seq)".into()));
            }
        }
        for e in events {
            let hi = e.src.max(e.dst) as usize;
            if self.cfg.base_mode == BaseMode::Explicit && hi >= self.shape.num_nodes {
                return Err(Error::Validation(format!("node {hi} outside the explicit embedding table")));
            }
            if e.edge_feat.len() != self.shape.edge_dim {
                return Err(Error::Validation(format!("edge feature arity {} != {}", e.edge_feat.len(), self.shape.edge_dim)));
            }
            self.state.node_mut(e.src.max(e.dst));
        }
        let mut touched: BTreeMap<NodeId, Vec<(usize, NodeId)>> = BTreeMap::new();
        for (i, e) in events.iter().enumerate() {
            touched.entry(e.src).or_default().push((i, e.dst));
            if e.dst != e.src {
                touched.entry(e.dst).or_default().push((i, e.src));
            }
        }
        if let Base::Implicit(gru) = &self.base {
            let mut updates = Vec::with_capacity(touched.len());
            for (&u, evs) in &touched {
                let mut tape = Tape::new(&self.params);
                let mut c = self.ctx(&mut tape);
                let hu = c.committed_h(u, 0)?;
                let vu = c.view(hu, u)?;
                let parts = c.event_parts(u, evs, events, 0)?;
                let x0 = c.t.concat(&[vu, parts])?;
                let h = gru.forward(c.t, hu, x0)?;
                updates.push((u, c.t.value(h).to_vec(), c.t.value(x0).to_vec()));
            }
            for (u, h, x0) in updates {
                let n = self.state.node_mut(u);
                n.levels[0].rotate(h);
                n.x0 = x0;
            }
        }
        if self.cfg.aggregation == Aggregation::Rtr {
            for k in 1..=self.cfg.layers {
                let Level::Rtr { msg, upd, .. } = &self.levels[k - 1] else { unreachable!() };
                let ab = self.cfg.ablations;
                let mut updates = Vec::with_capacity(touched.len());
                for (&u, evs) in &touched {
                    let last = events[evs.last().expect("non-empty").0];
                    let mut tape = Tape::new(&self.params);
                    let mut c = self.ctx(&mut tape);
                    let r = if ab.no_revision { c.t.zeros(1, self.cfg.hidden(k)) } else { c.revision(u, k, &mut Vec::new(), last.key())? };
                    let parts = if ab.no_msg_event { c.t.zeros(1, self.cfg.view(k - 1) + self.phi.dim()) } else { c.event_parts(u, evs, events, k - 1)? };
                    let f3 = c.t.concat(&[r, parts])?;
                    let st = if ab.no_self_h { c.t.zeros(1, self.cfg.hidden(k - 1)) } else { c.committed_h(u, k - 1)? };
                    let m = msg.forward(c.t, st, f3)?;
                    let prev = if ab.no_prev_state { c.t.zeros(1, self.cfg.hidden(k)) } else { c.committed_h(u, k)? };
                    let h = upd.forward(c.t, prev, m)?;
                    updates.push((u, c.t.value(h).to_vec(), c.t.value(f3).to_vec()));
                }
                for (u, h, f3) in updates {
                    let n = self.state.node_mut(u);
                    n.levels[k].rotate(h);
                    n.func3[k - 1] = f3;
                }
            }
        }
        for (&u, evs) in &touched {
            let last = events[evs.last().expect("non-empty").0];
            let n = self.state.node_mut(u);
            n.touched = true;
            n.t_last = last.time;
            n.s_last = last.seq;
            n.interactions += evs.len() as u64;
        }
        for e in events {
            self.state.store.insert(e)?;
        }
        self.state.last = Some(events[events.len() - 1].key());
        Ok(())
    }

    /// Serialize config, parameters, optimizer moments and replay state.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header();
        w.str(&serde_json::to_string(&self.cfg).expect("config serializes"));
        w.u64(self.shape.num_nodes as u64);
        w.u64(self.shape.edge_dim as u64);
        w.f64(self.shape.time_scale);
        w.f64(self.shape.seq_scale);
        self.params.write(&mut w);
        w.f64s(&self.node_feats);
        self.state.write(&mut w);
        w.buf
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::with_header(buf)?;
        let cfg: RtrConfig = serde_json::from_str(&r.str()?)?;
        let shape = ModelShape { num_nodes: r.u64()? as usize, edge_dim: r.u64()? as usize, time_scale: r.f64()?, seq_scale: r.f64()? };
        let mut m = RtrModel::new(cfg, shape, 0)?;
        let params = ParamStore::read(&mut r)?;
        if !params.same_layout(&m.params) {
            return Err(Error::Checkpoint("parameter layout does not match the stored config".into()));
        }
        m.params = params;
        m.set_node_features(r.f64s()?)?;
        m.state = ModelState::read(&mut r, Self::state_dims(&m.cfg))?;
        r.finish()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// One differentiable computation over the model's committed state.
struct Ctx<'m, 'c, 'p> {
    m: &'m RtrModel,
    t: &'c mut Tape<'p>,
    calls: u64,
    memo: HashMap<(NodeId, usize, Vec<NodeId>), Var>,
}

impl<'m> Ctx<'m, '_, '_> {
    fn cfg(&self) -> &'m RtrConfig {
        &self.m.cfg
    }

    fn view(&mut self, h: Var, w: NodeId) -> Result<Var> {
        let f = self.cfg().node_feat_dim;
        if f == 0 {
            return Ok(h);
        }
        let w = w as usize;
        let x = if w < self.m.shape.num_nodes { self.m.node_feats[w * f..(w + 1) * f].to_vec() } else { vec![0.0; f] };
        let x = self.t.row(x);
        self.t.concat(&[h, x])
    }

    /// Committed h_w^k (a parameter row for explicit layer 0).
    fn committed_h(&mut self, w: NodeId, k: usize) -> Result<Var> {
        if k == 0 {
            if let Base::Explicit(p) = self.m.base {
                return self.t.param_row(p, w as usize);
            }
        }
        Ok(match self.m.state.node(w) {
            Some(n) => self.t.row(n.levels[k].h_cur.clone()),
            None => self.t.zeros(1, self.cfg().hidden(k)),
        })
    }

    fn delta_h(&self, w: NodeId, k: usize) -> Vec<f64> {
        match (k, &self.m.base, self.m.state.node(w)) {
            (0, Base::Explicit(_), _) | (_, _, None) => vec![0.0; self.cfg().hidden(k)],
            (_, _, Some(n)) => n.levels[k].delta(),
        }
    }

    fn phi_rows(&mut self, u: NodeId, entries: &[&NeighborEntry], now: Now) -> Result<Var> {
        let m = self.m;
        let count = |w: NodeId| m.state.node(w).map_or(0, |n| n.interactions);
        let rows: Vec<PhiInput> = entries
            .iter()
            .map(|e| {
                if e.time > now.0 || e.seq > now.1 {
                    return Err(Error::Causality(format!("neighbor entry (t={}, s={}) after query (t={}, s={})", e.time, e.seq, now.0, now.1)));
                }
                Ok(PhiInput { dt: now.0 - e.time, ds: (now.1 - e.seq) as f64, edge_feat: &e.edge_feat, counts: (count(u), count(e.node)) })
            })
            .collect::<Result<_>>()?;
        m.phi.encode(self.t, &rows)
    }

    /// Child revision r_w^j(t, S ∪ {u}) used inside u's rows.
    fn child_revision(&mut self, w: NodeId, j: usize, u: NodeId, path: &mut Vec<NodeId>, now: Now) -> Result<Var> {
        let ab = self.cfg().ablations;
        if j == 0 {
            return Ok(if ab.no_h_v && ab.no_delta_h {
                let d = self.delta_h(w, 0);
                self.t.row(d)
            } else {
                self.t.zeros(1, self.cfg().hidden(0))
            });
        }
        if ab.no_r_v {
            return Ok(self.t.zeros(1, self.cfg().hidden(j)));
        }
        path.push(u);
        let r = self.revision(w, j, path, now);
        path.pop();
        r
    }

    /// Rows [r_w ‖ Δh_w ‖ h_w ‖ Φ ‖ 1[w ∈ S]] for u's recent neighbors, oldest first.
    fn revision_rows(&mut self, u: NodeId, k: usize, path: &mut Vec<NodeId>, now: Now) -> Result<Option<Var>> {
        let m = self.m;
        let cfg = &m.cfg;
        let entries = m.state.store.recent(u, now.0)?;
        if entries.is_empty() {
            return Ok(None);
        }
        let n = entries.len();
        let mut children: Vec<(NodeId, Var)> = Vec::new();
        let mut r_rows = Vec::with_capacity(n);
        for e in &entries {
            let r = match children.iter().find(|c| c.0 == e.node) {
                Some(&(_, r)) => r,
                None => {
                    let r = self.child_revision(e.node, k - 1, u, path, now)?;
                    children.push((e.node, r));
                    r
                }
            };
            r_rows.push(r);
        }
        let r_block = self.t.stack(&r_rows)?;
        let hd = cfg.hidden(k - 1);
        let dh = if cfg.ablations.no_delta_h { vec![0.0; n * hd] } else { entries.iter().flat_map(|e| self.delta_h(e.node, k - 1)).collect() };
        let dh_block = self.t.constant(n, hd, dh)?;
        let h_block = if cfg.ablations.no_h_v {
            self.t.zeros(n, cfg.view(k - 1))
        } else {
            let mut rows = Vec::with_capacity(n);
            for e in &entries {
                let h = self.committed_h(e.node, k - 1)?;
                rows.push(self.view(h, e.node)?);
            }
            self.t.stack(&rows)?
        };
        let phi = self.phi_rows(u, &entries, now)?;
        let mut parts = vec![r_block, dh_block, h_block, phi];
        if cfg.hetero {
            let ind = entries.iter().map(|e| f64::from(u8::from(path.contains(&e.node)))).collect();
            parts.push(self.t.constant(n, 1, ind)?);
        }
        Ok(Some(self.t.concat(&parts)?))
    }

    /// r_u^k(t, S); zero without history, r^0 handled by the caller.
    fn revision(&mut self, u: NodeId, k: usize, path: &mut Vec<NodeId>, now: Now) -> Result<Var> {
        let key = {
            let mut s = if self.cfg().hetero { path.clone() } else { Vec::new() };
            s.sort_unstable();
            s.dedup();
            (u, k, s)
        };
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let m = self.m;
        let Level::Rtr { att, .. } = &m.levels[k - 1] else { unreachable!("revision on classic layer") };
        let r = match self.revision_rows(u, k, path, now)? {
            None => self.t.zeros(1, self.cfg().hidden(k)),
            Some(z) => {
                self.calls += 1;
                att.forward(self.t, z)?
            }
        };
        self.memo.insert(key, r);
        Ok(r)
    }

    /// Aggregated [view_v^j ‖ Φ(e)] over u's events in the batch (each Φ at its own event).
    fn event_parts(&mut self, u: NodeId, evs: &[(usize, NodeId)], events: &[&Event], j: usize) -> Result<Var> {
        let m = self.m;
        let mut rows = Vec::with_capacity(evs.len());
        let count = |w: NodeId| m.state.node(w).map_or(0, |n| n.interactions);
        let inputs: Vec<PhiInput> =
            evs.iter().map(|&(i, v)| PhiInput { dt: 0.0, ds: 0.0, edge_feat: &events[i].edge_feat, counts: (count(u), count(v)) }).collect();
        let phi = m.phi.encode(self.t, &inputs)?;
        for &(_, v) in evs {
            let h = self.committed_h(v, j)?;
            rows.push(self.view(h, v)?);
        }
        let hv = self.t.stack(&rows)?;
        let all = self.t.concat(&[hv, phi])?;
        Ok(match self.cfg().batch_multi_event {
            MultiEvent::Mean => self.t.mean_rows(all)?,
            MultiEvent::Sum => {
                let s = self.t.mean_rows(all)?;
                self.t.scale(s, evs.len() as f64)
            }
        })
    }

    /// One-step traceback: recompute u's committed states from cached inputs with
    /// current parameters, so the base, message and update cells receive gradients.
    fn traced(&mut self, u: NodeId) -> Result<Vec<Var>> {
        let m = self.m;
        let cfg = &m.cfg;
        let node = m.state.node(u).filter(|n| n.touched);
        let mut hs = Vec::with_capacity(cfg.layers + 1);
        hs.push(match (&m.base, node) {
            (Base::Explicit(p), _) => self.t.param_row(*p, u as usize)?,
            (Base::Implicit(g), Some(n)) => {
                let h = self.t.row(n.levels[0].h_prev.clone());
                let x = self.t.row(n.x0.clone());
                g.forward(self.t, h, x)?
            }
            (Base::Implicit(_), None) => self.t.zeros(1, cfg.hidden(0)),
        });
        if cfg.aggregation == Aggregation::Classic {
            return Ok(hs);
        }
        let ab = cfg.ablations;
        for k in 1..=cfg.layers {
            let Level::Rtr { msg, upd, .. } = &m.levels[k - 1] else { unreachable!() };
            hs.push(match node {
                None => self.t.zeros(1, cfg.hidden(k)),
                Some(n) => {
                    let prev = if ab.no_prev_state { self.t.zeros(1, cfg.hidden(k)) } else { self.t.row(n.levels[k].h_prev.clone()) };
                    let st = if ab.no_self_h { self.t.zeros(1, cfg.hidden(k - 1)) } else { hs[k - 1] };
                    let f3 = self.t.row(n.func3[k - 1].clone());
                    let mv = msg.forward(self.t, st, f3)?;
                    upd.forward(self.t, prev, mv)?
                }
            });
        }
        Ok(hs)
    }

    /// Top-layer embedding: revision → placeholder message → update, uncommitted.
    fn embed(&mut self, u: NodeId, now: Now) -> Result<Var> {
        let cfg = self.cfg();
        if cfg.aggregation == Aggregation::Classic {
            return self.classic(u, cfg.layers, true, now, &mut HashMap::new());
        }
        let hs = self.traced(u)?;
        let k = cfg.layers;
        if k == 0 {
            return self.view(hs[0], u);
        }
        let ab = cfg.ablations;
        let r = if ab.no_revision { self.t.zeros(1, cfg.hidden(k)) } else { self.revision(u, k, &mut Vec::new(), now)? };
        let pad = self.t.zeros(1, cfg.view(k - 1) + self.m.phi.dim());
        let f3 = self.t.concat(&[r, pad])?;
        let st = if ab.no_self_h { self.t.zeros(1, cfg.hidden(k - 1)) } else { hs[k - 1] };
        let m = self.m;
        let Level::Rtr { msg, upd, .. } = &m.levels[k - 1] else { unreachable!() };
        let mv = msg.forward(self.t, st, f3)?;
        let prev = if ab.no_prev_state { self.t.zeros(1, cfg.hidden(k)) } else { hs[k] };
        let h = upd.forward(self.t, prev, mv)?;
        self.view(h, u)
    }

    /// Rows [view_w^{k-1} ‖ Φ] of the classic aggregation.
    fn classic_rows(&mut self, u: NodeId, k: usize, now: Now, memo: &mut HashMap<(NodeId, usize), Var>) -> Result<Option<Var>> {
        let entries = self.m.state.store.recent(u, now.0)?;
        if entries.is_empty() {
            return Ok(None);
        }
        let mut rows = Vec::with_capacity(entries.len());
        for e in &entries {
            rows.push(self.classic(e.node, k - 1, false, now, memo)?);
        }
        let h = self.t.stack(&rows)?;
        let phi = self.phi_rows(u, &entries, now)?;
        Ok(Some(self.t.concat(&[h, phi])?))
    }

    /// h^k = COMBINE(h^{k-1}, attention over neighbors); the root uses traced base states.
    fn classic(&mut self, u: NodeId, k: usize, root: bool, now: Now, memo: &mut HashMap<(NodeId, usize), Var>) -> Result<Var> {
        if !root {
            if let Some(&v) = memo.get(&(u, k)) {
                return Ok(v);
            }
        }
        let v = if k == 0 {
            let h = if root { self.traced(u)?[0] } else { self.committed_h(u, 0)? };
            self.view(h, u)?
        } else {
            let hu = self.classic(u, k - 1, root, now, memo)?;
            let m = self.m;
            let Level::Classic { att, combine } = &m.levels[k - 1] else { unreachable!() };
            let a = match self.classic_rows(u, k, now, memo)? {
                None => self.t.zeros(1, self.cfg().hidden(k)),
                Some(z) => {
                    self.calls += 1;
                    att.forward(self.t, z)?
                }
            };
            let x = self.t.concat(&[hu, a])?;
            let y = combine.forward(self.t, x)?;
            let h = self.t.tanh(y);
            self.view(h, u)?
        };
        if !root {
            memo.insert((u, k), v);
        }
        Ok(v)
    }

    fn logit(&mut self, eu: Var, ev: Var) -> Result<Var> {
        let one = |c: &mut Self, a: Var, b: Var| -> Result<Var> {
            let x = c.t.concat(&[a, b])?;
            let h = c.m.dec.0.forward(c.t, x)?;
            let h = c.t.relu(h);
            c.m.dec.1.forward(c.t, h)
        };
        let l = one(self, eu, ev)?;
        if self.cfg().symmetric_decoder {
            let r = one(self, ev, eu)?;
            return self.t.add(l, r);
        }
        Ok(l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::check_gradients;

    fn small(layers: usize, hetero: bool) -> RtrConfig {
        RtrConfig { layers, dim: 4, heads: 2, neighbors: 3, hetero, time_dim: 2, seq_dim: 2, ..Default::default() }
    }

    fn stream() -> Vec<Event> {
        let pairs = [(0, 1), (1, 2), (0, 2), (2, 3), (3, 0), (1, 3), (0, 1), (2, 0)];
        pairs.iter().enumerate().map(|(i, &(u, v))| Event::new(u, v, i as f64, i as u64)).collect()
    }

    fn replayed(cfg: RtrConfig) -> RtrModel {
        let mut m = RtrModel::new(cfg, ModelShape::new(4, 0), 3).unwrap();
        for e in &stream() {
            m.apply_event(e).unwrap();
        }
        m
    }

    #[test]
    fn fresh_node_without_history_embeds_deterministically() {
        let m = RtrModel::new(small(2, true), ModelShape::new(3, 0), 1).unwrap();
        let (a, calls) = m.embed_counted(0, 1.0, 0).unwrap();
        assert_eq!(calls, 0);
        assert_eq!(a, m.embed(0, 1.0, 0).unwrap());
        assert_eq!(a.len(), 4);
    }

    #[test]
    fn out_of_order_commit_is_causality_error() {
        let mut m = replayed(small(1, true));
        assert!(matches!(m.apply_event(&Event::new(0, 1, 2.0, 2)), Err(Error::Causality(_))));
    }

    #[test]
    fn embedding_does_not_mutate_state() {
        let m = replayed(small(2, true));
        let before = m.state().clone();
        m.embed(0, 9.0, 9).unwrap();
        m.score_link(0, 3, 9.0, 9).unwrap();
        assert_eq!(&before, m.state());
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        let m = replayed(small(2, true));
        let back = RtrModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(m.embed(2, 10.0, 10).unwrap(), back.embed(2, 10.0, 10).unwrap());
        let mut bytes = m.to_bytes();
        bytes[0] ^= 1;
        assert!(matches!(RtrModel::from_bytes(&bytes), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn attention_calls_bounded_by_geometric_sum() {
        let m = replayed(small(2, true));
        let (_, calls) = m.embed_counted(0, 10.0, 10).unwrap();
        assert!((1..=1 + 3).contains(&calls), "{calls}");
    }

    #[test]
    fn event_loss_gradients_match_finite_differences() {
        for cfg in [small(2, true), RtrConfig { aggregation: Aggregation::Classic, hetero: false, ..small(2, false) }] {
            let m = replayed(cfg);
            let mut params = m.params().clone();
            let e = Event::new(1, 2, 10.0, 10);
            let report = check_gradients(&mut params, 1e-4, |t| Ok(m.event_loss(t, &e, 3)?.0)).unwrap();
            assert!(report.passed(), "{report:?}");
            assert_eq!(report.checked, m.params().num_scalars());
        }
    }

    #[test]
    fn no_revision_zeroes_the_revision_input() {
        let cfg = RtrConfig { hetero: false, ablations: Ablations { no_revision: true, ..Default::default() }, ..small(1, false) };
        let m = replayed(cfg);
        assert!(m.revision_matrix(0, 1, 10.0, 10).unwrap().is_some());
    }
}
