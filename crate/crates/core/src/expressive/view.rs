use crate::expressive::intern::{Interner, Tag};
use crate::graph::{NodeId, TemporalGraph};

/// One endpoint's side of an event: the other endpoint, the time and the interned Φ.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Arc {
    pub nbr: NodeId,
    pub time: f64,
    pub phi: u64,
}

/// Per-node incidence lists in (time, seq) order with exact Φ = (time, direction, edge features).
pub(crate) struct Incidence {
    pub adj: Vec<Vec<Arc>>,
}

const UNDIRECTED: u64 = 0;
const OUT: u64 = 1;
const IN: u64 = 2;

impl Incidence {
    pub fn new(g: &TemporalGraph, it: &mut Interner) -> Self {
        let mut adj = vec![Vec::new(); g.num_nodes()];
        let directed = g.is_directed();
        for e in g.events() {
            let mut phi = |dir: u64| {
                let mut key = vec![e.time.to_bits(), dir];
                key.extend(e.edge_feat.iter().map(|x| x.to_bits()));
                it.tagged(Tag::Phi, &key)
            };
            let (a, b) = if directed { (phi(OUT), phi(IN)) } else { (phi(UNDIRECTED), phi(UNDIRECTED)) };
            adj[e.src as usize].push(Arc { nbr: e.dst, time: e.time, phi: a });
            if e.src != e.dst {
                adj[e.dst as usize].push(Arc { nbr: e.src, time: e.time, phi: b });
            }
        }
        Incidence { adj }
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    /// Arcs of `u` with time ≤ t (`inclusive`) or < t.
    pub fn upto(&self, u: NodeId, t: f64, inclusive: bool) -> &[Arc] {
        let a = &self.adj[u as usize];
        let n = if inclusive { a.partition_point(|x| x.time <= t) } else { a.partition_point(|x| x.time < t) };
        &a[..n]
    }

    /// Arcs of `u` at exactly time t.
    pub fn at(&self, u: NodeId, t: f64) -> &[Arc] {
        let a = &self.adj[u as usize];
        &a[a.partition_point(|x| x.time < t)..a.partition_point(|x| x.time <= t)]
    }
}

/// Sorted union of both graphs' event times.
pub fn shared_grid(a: &TemporalGraph, b: &TemporalGraph) -> Vec<f64> {
    let mut ts = a.timestamps();
    ts.extend(b.timestamps());
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}
