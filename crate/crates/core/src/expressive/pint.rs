use serde::{Deserialize, Serialize};

use crate::expressive::intern::{Interner, Tag};
use crate::expressive::t1wl::refine;
use crate::expressive::trace::StackedTrace;
use crate::expressive::view::Incidence;
use crate::graph::{NodeId, TemporalGraph};

/// Cumulative interaction counts under the graph's own node labeling.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosFeatureMatrix {
    pub n: usize,
    /// Row-major counts; row u holds the number of length-1 walks from u to each node.
    pub counts: Vec<u64>,
}

impl PosFeatureMatrix {
    pub fn row(&self, u: usize) -> &[u64] {
        &self.counts[u * self.n..(u + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<&[u64]> {
        (0..self.n).map(|u| self.row(u)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.counts[i * self.n + j] == self.counts[j * self.n + i]))
    }

    /// A row permutation π with π·self = other, if one exists (`pi[i]` = source row of row i).
    pub fn row_permutation_to(&self, other: &PosFeatureMatrix) -> Option<Vec<usize>> {
        if self.n != other.n {
            return None;
        }
        let mut used = vec![false; self.n];
        let mut pi = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let j = (0..self.n).find(|&j| !used[j] && self.row(j) == other.row(i))?;
            used[j] = true;
            pi.push(j);
        }
        Some(pi)
    }
}

/// Positional features at time t: counts over events with time ≤ t.
pub fn pint_pos_features(g: &TemporalGraph, t: f64) -> PosFeatureMatrix {
    let n = g.num_nodes();
    let mut counts = vec![0; n * n];
    for e in g.events().iter().take_while(|e| e.time <= t) {
        let (u, v) = (e.src as usize, e.dst as usize);
        counts[u * n + v] += 1;
        if u != v && !g.is_directed() {
            counts[v * n + u] += 1;
        }
    }
    PosFeatureMatrix { n, counts }
}

/// Temporal-1WL seeded with c⁰(u) = row u of the positional matrix at each grid time.
pub fn pint_pos_colors(g: &TemporalGraph, iters: usize, grid: &[f64], it: &mut Interner) -> StackedTrace {
    let inc = Incidence::new(g, it);
    let mut trace = StackedTrace::new(grid.to_vec(), g.num_nodes());
    for &t in grid {
        let pos = pint_pos_features(g, t);
        let init = (0..pos.n).map(|u| it.tagged(Tag::Pos, pos.row(u))).collect();
        let levels = refine(&inc, iters, t, init, it);
        for (u, &c) in levels[iters].iter().enumerate() {
            trace.colors[u as NodeId as usize].push(c);
        }
    }
    trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphOptions, RawEvent};

    #[test]
    fn counts_accumulate_and_stay_symmetric() {
        let raw = vec![RawEvent::new(0, 1, 1.0), RawEvent::new(1, 0, 2.0), RawEvent::new(1, 2, 3.0)];
        let g = TemporalGraph::from_records(3, raw, GraphOptions::default()).unwrap();
        let p = pint_pos_features(&g, 2.0);
        assert_eq!(p.counts, vec![0, 2, 0, 2, 0, 0, 0, 0, 0]);
        assert!(p.is_symmetric());
        assert_eq!(pint_pos_features(&g, 0.5).counts, vec![0; 9]);
    }

    #[test]
    fn row_permutation_search() {
        let a = PosFeatureMatrix { n: 2, counts: vec![0, 1, 2, 3] };
        let b = PosFeatureMatrix { n: 2, counts: vec![2, 3, 0, 1] };
        assert_eq!(a.row_permutation_to(&b), Some(vec![1, 0]));
        let c = PosFeatureMatrix { n: 2, counts: vec![1, 0, 3, 2] };
        assert_eq!(a.row_permutation_to(&c), None);
    }
}
