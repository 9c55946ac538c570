use crate::error::{Error, Result};
use crate::graph::{NeighborEntry, NeighborStore, NodeId};
use crate::nn::codec::{Reader, Writer};

/// One layer's recurrent state of one node: the values after and before its last update.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    pub h_cur: Vec<f64>,
    pub h_prev: Vec<f64>,
}

impl LayerState {
    pub fn zeros(dim: usize) -> Self {
        LayerState { h_cur: vec![0.0; dim], h_prev: vec![0.0; dim] }
    }

    /// Δh = h_cur − h_prev.
    pub fn delta(&self) -> Vec<f64> {
        self.h_cur.iter().zip(&self.h_prev).map(|(a, b)| a - b).collect()
    }

    pub(crate) fn rotate(&mut self, new: Vec<f64>) {
        self.h_prev = std::mem::replace(&mut self.h_cur, new);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeState {
    /// Layers 0..=K; layer 0 is unused with explicit base embeddings.
    pub levels: Vec<LayerState>,
    pub touched: bool,
    pub t_last: f64,
    pub s_last: u64,
    pub interactions: u64,
    /// Base GRU input of the last update, for one-step traceback.
    pub x0: Vec<f64>,
    /// Message inputs of the last update per layer 1..=K (index k − 1).
    pub func3: Vec<Vec<f64>>,
}

impl NodeState {
    pub fn fresh(dims: &[usize]) -> Self {
        NodeState {
            levels: dims.iter().map(|&d| LayerState::zeros(d)).collect(),
            touched: false,
            t_last: 0.0,
            s_last: 0,
            interactions: 0,
            x0: Vec::new(),
            func3: vec![Vec::new(); dims.len().saturating_sub(1)],
        }
    }
}

/// Everything the model mutates while replaying a stream.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub(crate) nodes: Vec<NodeState>,
    pub(crate) store: NeighborStore,
    pub(crate) last: Option<(f64, u64)>,
    dims: Vec<usize>,
}

impl ModelState {
    pub fn new(num_nodes: usize, dims: Vec<usize>, cap: usize) -> Self {
        ModelState { nodes: vec![NodeState::fresh(&dims); num_nodes], store: NeighborStore::new(num_nodes, cap), last: None, dims }
    }

    pub fn node(&self, u: NodeId) -> Option<&NodeState> {
        self.nodes.get(u as usize)
    }

    /// State of `u`, created fresh if `u` is beyond the current table.
    pub fn node_mut(&mut self, u: NodeId) -> &mut NodeState {
        let u = u as usize;
        if u >= self.nodes.len() {
            let fresh = NodeState::fresh(&self.dims);
            self.nodes.resize(u + 1, fresh);
        }
        &mut self.nodes[u]
    }

    pub fn neighbors(&self) -> &NeighborStore {
        &self.store
    }

    pub fn last_committed(&self) -> Option<(f64, u64)> {
        self.last
    }

    pub fn reset(&mut self) {
        let n = self.nodes.len();
        self.nodes = vec![NodeState::fresh(&self.dims); n];
        self.store.clear();
        self.last = None;
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        match self.last {
            Some((t, s)) => {
                w.u8(1);
                w.f64(t);
                w.u64(s);
            }
            None => w.u8(0),
        }
        w.u64(self.nodes.len() as u64);
        for n in &self.nodes {
            w.u8(n.touched as u8);
            w.f64(n.t_last);
            w.u64(n.s_last);
            w.u64(n.interactions);
            w.u32(n.levels.len() as u32);
            for l in &n.levels {
                w.f64s(&l.h_cur);
                w.f64s(&l.h_prev);
            }
            w.f64s(&n.x0);
            w.u32(n.func3.len() as u32);
            for f in &n.func3 {
                w.f64s(f);
            }
        }
        w.u64(self.store.capacity() as u64);
        w.u64(self.store.num_nodes() as u64);
        for u in 0..self.store.num_nodes() {
            let entries: Vec<&NeighborEntry> = self.store.entries(u as NodeId).collect();
            w.u64(entries.len() as u64);
            for e in entries {
                w.u32(e.node);
                w.f64(e.time);
                w.u64(e.seq);
                w.f64s(&e.edge_feat);
            }
        }
    }

    pub(crate) fn read(r: &mut Reader, dims: Vec<usize>) -> Result<Self> {
        let last = match r.u8()? {
            0 => None,
            1 => Some((r.f64()?, r.u64()?)),
            x => return Err(Error::Checkpoint(format!("bad flag {x}"))),
        };
        let n = r.u64()? as usize;
        let mut nodes = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            let touched = r.u8()? != 0;
            let t_last = r.f64()?;
            let s_last = r.u64()?;
            let interactions = r.u64()?;
            let nl = r.u32()? as usize;
            if nl != dims.len() {
                return Err(Error::Checkpoint(format!("node state has {nl} layers, config has {}", dims.len())));
            }
            let mut levels = Vec::with_capacity(nl);
            for _ in 0..nl {
                levels.push(LayerState { h_cur: r.f64s()?, h_prev: r.f64s()? });
            }
            let x0 = r.f64s()?;
            let nf = r.u32()? as usize;
            let func3 = (0..nf).map(|_| r.f64s()).collect::<Result<_>>()?;
            nodes.push(NodeState { levels, touched, t_last, s_last, interactions, x0, func3 });
        }
        let cap = r.u64()? as usize;
        let nn = r.u64()? as usize;
        let mut lists = Vec::with_capacity(nn.min(1 << 24));
        for _ in 0..nn {
            let len = r.u64()? as usize;
            let mut list = Vec::with_capacity(len.min(1 << 16));
            for _ in 0..len {
                list.push(NeighborEntry { node: r.u32()?, time: r.f64()?, seq: r.u64()?, edge_feat: r.f64s()? });
            }
            lists.push(list);
        }
        Ok(ModelState { nodes, store: NeighborStore::restore(cap, lists), last, dims })
    }
}
