use std::collections::{BTreeSet, HashMap};

use crate::expressive::intern::{Interner, Tag};
use crate::expressive::trace::StackedTrace;
use crate::expressive::view::Incidence;
use crate::graph::{NodeId, TemporalGraph};

/// RTR layers with every learnable function replaced by interning of its arguments.
struct HashRtr<'a> {
    inc: &'a Incidence,
    layers: usize,
    hetero: bool,
    /// `cur[k][u]`, `prev[k][u]`: state of layer k after and before u's last update.
    cur: Vec<Vec<u64>>,
    prev: Vec<Vec<u64>>,
    zero: u64,
}

/// Which events a revision sees: strictly before t (commit) or up to t (readout).
#[derive(Clone, Copy)]
struct Cut {
    t: f64,
    inclusive: bool,
}

type Memo = HashMap<(NodeId, usize, Vec<NodeId>), u64>;

impl HashRtr<'_> {
    fn delta(&self, w: NodeId, k: usize, it: &mut Interner) -> u64 {
        it.tagged(Tag::Delta, &[self.prev[k][w as usize], self.cur[k][w as usize]])
    }

    /// r_u^k(t, S) over the events of `cut`.
    fn revision(&self, u: NodeId, k: usize, path: &mut BTreeSet<NodeId>, cut: Cut, it: &mut Interner, memo: &mut Memo) -> u64 {
        let key = (u, k, if self.hetero { path.iter().copied().collect() } else { Vec::new() });
        if let Some(&r) = memo.get(&key) {
            return r;
        }
        let arcs = self.inc.upto(u, cut.t, cut.inclusive);
        let mut children: HashMap<NodeId, u64> = HashMap::new();
        let mut rows = Vec::with_capacity(arcs.len());
        for a in arcs {
            let child = match children.get(&a.nbr) {
                Some(&c) => c,
                None => {
                    let c = if k == 1 {
                        self.zero
                    } else {
                        let fresh = path.insert(u);
                        let c = self.revision(a.nbr, k - 1, path, cut, it, memo);
                        if fresh {
                            path.remove(&u);
                        }
                        c
                    };
                    children.insert(a.nbr, c);
                    c
                }
            };
            let dh = self.delta(a.nbr, k - 1, it);
            let ind = u64::from(self.hetero && path.contains(&a.nbr));
            rows.push(it.tagged(Tag::RevRow, &[child, dh, self.cur[k - 1][a.nbr as usize], a.phi, ind]));
        }
        let r = it.multiset(Tag::Rev, &[k as u64], rows);
        memo.insert(key, r);
        r
    }

    /// Message of layer k for u: own lower state, revision, and the (possibly empty) event multiset.
    fn message(&self, u: NodeId, k: usize, r: u64, events: Vec<u64>, it: &mut Interner) -> u64 {
        it.multiset(Tag::Msg, &[k as u64, self.cur[k - 1][u as usize], r], events)
    }

    fn update(&self, u: NodeId, k: usize, m: u64, it: &mut Interner) -> u64 {
        it.tagged(Tag::Upd, &[k as u64, self.cur[k][u as usize], m])
    }

    /// Commit all events at time t, layer by layer.
    fn commit(&mut self, t: f64, it: &mut Interner) {
        let touched: Vec<NodeId> = (0..self.inc.num_nodes() as NodeId).filter(|&u| !self.inc.at(u, t).is_empty()).collect();
        if touched.is_empty() {
            return;
        }
        let base: Vec<u64> = touched
            .iter()
            .map(|&u| {
                let rows = self.inc.at(u, t).iter().map(|a| it.tagged(Tag::MsgRow, &[self.cur[0][a.nbr as usize], a.phi])).collect();
                it.multiset(Tag::Base, &[self.cur[0][u as usize]], rows)
            })
            .collect();
        self.write(0, &touched, base);
        let cut = Cut { t, inclusive: false };
        for k in 1..=self.layers {
            let mut memo = Memo::new();
            let new: Vec<u64> = touched
                .iter()
                .map(|&u| {
                    let r = self.revision(u, k, &mut BTreeSet::new(), cut, it, &mut memo);
                    let evs = self.inc.at(u, t).iter().map(|a| it.tagged(Tag::MsgRow, &[self.cur[k - 1][a.nbr as usize], a.phi])).collect();
                    let m = self.message(u, k, r, evs, it);
                    self.update(u, k, m, it)
                })
                .collect();
            self.write(k, &touched, new);
        }
    }

    fn write(&mut self, k: usize, nodes: &[NodeId], values: Vec<u64>) {
        for (&u, v) in nodes.iter().zip(values) {
            let u = u as usize;
            self.prev[k][u] = std::mem::replace(&mut self.cur[k][u], v);
        }
    }

    /// Top-layer embedding as of t: revision over events up to t, placeholder event, uncommitted.
    fn readout(&self, t: f64, it: &mut Interner) -> Vec<u64> {
        let k = self.layers;
        let mut memo = Memo::new();
        (0..self.inc.num_nodes() as NodeId)
            .map(|u| {
                let r = self.revision(u, k, &mut BTreeSet::new(), Cut { t, inclusive: true }, it, &mut memo);
                let m = self.message(u, k, r, Vec::new(), it);
                self.update(u, k, m, it)
            })
            .collect()
    }
}

/// Hash-RTR embeddings at every time of `grid`. Requires `layers ≥ 1`.
pub fn hash_rtr_colors(g: &TemporalGraph, layers: usize, hetero: bool, grid: &[f64], it: &mut Interner) -> StackedTrace {
    assert!(layers >= 1, "hash-RTR needs at least one layer");
    let inc = Incidence::new(g, it);
    let zero = it.zero();
    let n = g.num_nodes();
    let mut m = HashRtr { inc: &inc, layers, hetero, cur: vec![vec![zero; n]; layers + 1], prev: vec![vec![zero; n]; layers + 1], zero };
    let mut trace = StackedTrace::new(grid.to_vec(), n);
    for &t in grid {
        m.commit(t, it);
        for (u, c) in m.readout(t, it).into_iter().enumerate() {
            trace.colors[u].push(c);
        }
    }
    trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expressive::trace::{iso_check, Verdict};
    use crate::graph::{GraphOptions, RawEvent};

    fn graph(n: usize, edges: &[(u32, u32, f64)]) -> TemporalGraph {
        TemporalGraph::from_records(n, edges.iter().map(|&(u, v, t)| RawEvent::new(u, v, t)).collect(), GraphOptions::default()).unwrap()
    }

    #[test]
    fn relabeled_copy_is_isomorphic_in_both_modes() {
        let g = graph(5, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 2.0), (3, 4, 2.0), (1, 3, 3.0), (0, 4, 3.0)]);
        let h = g.relabel(&[3, 0, 4, 1, 2]).unwrap();
        for hetero in [false, true] {
            let mut it = Interner::new();
            let grid = [1.0, 2.0, 3.0];
            let (a, b) = (hash_rtr_colors(&g, 3, hetero, &grid, &mut it), hash_rtr_colors(&h, 3, hetero, &grid, &mut it));
            assert_eq!(iso_check(&a, &b).unwrap(), Verdict::Isomorphic);
        }
    }

    #[test]
    fn detects_event_order_changes() {
        let a = graph(3, &[(0, 1, 1.0), (1, 2, 2.0)]);
        let b = graph(3, &[(1, 2, 1.0), (0, 1, 2.0)]);
        let mut it = Interner::new();
        let grid = [1.0, 2.0];
        // Reversed order on a path is the mirror image: isomorphic.
        assert_eq!(iso_check(&hash_rtr_colors(&a, 2, true, &grid, &mut it), &hash_rtr_colors(&b, 2, true, &grid, &mut it)).unwrap(), Verdict::Isomorphic);
        let c = graph(3, &[(0, 1, 1.0), (0, 1, 2.0)]);
        assert_eq!(iso_check(&hash_rtr_colors(&a, 2, true, &grid, &mut it), &hash_rtr_colors(&c, 2, true, &grid, &mut it)).unwrap(), Verdict::NonIsomorphic);
    }
}
