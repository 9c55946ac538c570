use crate::expressive::intern::{Interner, Tag};
use crate::expressive::trace::StackedTrace;
use crate::expressive::view::Incidence;
use crate::graph::{NodeId, TemporalGraph};

/// Color refinement over timed neighbor multisets at each grid time.
/// `init` gives c⁰ per node at a grid time; `None` means the constant color.
pub(crate) fn refine(inc: &Incidence, iters: usize, t: f64, init: Vec<u64>, it: &mut Interner) -> Vec<Vec<u64>> {
    let mut levels = vec![init];
    for i in 0..iters {
        let c = &levels[i];
        let next = (0..inc.num_nodes())
            .map(|u| {
                let rows = inc.upto(u as NodeId, t, true).iter().map(|a| it.tagged(Tag::Row, &[c[a.nbr as usize], a.phi])).collect();
                it.multiset(Tag::Wl, &[c[u]], rows)
            })
            .collect();
        levels.push(next);
    }
    levels
}

/// Temporal-1WL colors after `iters` rounds, at every time of `grid`, over events up to that time.
pub fn t1wl_refine(g: &TemporalGraph, iters: usize, grid: &[f64], it: &mut Interner) -> StackedTrace {
    let inc = Incidence::new(g, it);
    let mut trace = StackedTrace::new(grid.to_vec(), g.num_nodes());
    let c0 = it.zero();
    for &t in grid {
        let levels = refine(&inc, iters, t, vec![c0; g.num_nodes()], it);
        for (u, &c) in levels[iters].iter().enumerate() {
            trace.colors[u].push(c);
        }
    }
    trace
}

/// All refinement rounds at one time (round 0 first), for partition checks.
pub fn t1wl_levels(g: &TemporalGraph, iters: usize, t: f64, it: &mut Interner) -> Vec<Vec<u64>> {
    let inc = Incidence::new(g, it);
    let c0 = it.zero();
    refine(&inc, iters, t, vec![c0; g.num_nodes()], it)
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
    fn star_and_path_differ_after_one_round() {
        let star = graph(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]);
        let path = graph(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]);
        let mut it = Interner::new();
        let (a, b) = (t1wl_refine(&star, 1, &[1.0], &mut it), t1wl_refine(&path, 1, &[1.0], &mut it));
        assert_eq!(iso_check(&a, &b).unwrap(), Verdict::NonIsomorphic);
    }

    #[test]
    fn three_node_star_is_a_path() {
        let star = graph(3, &[(0, 1, 1.0), (0, 2, 1.0)]);
        let path = graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let mut it = Interner::new();
        let (a, b) = (t1wl_refine(&star, 3, &[1.0], &mut it), t1wl_refine(&path, 3, &[1.0], &mut it));
        assert_eq!(iso_check(&a, &b).unwrap(), Verdict::Isomorphic);
    }

    #[test]
    fn multi_edges_and_self_loops_count() {
        let tri = graph(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]);
        let other = graph(3, &[(0, 1, 1.0), (0, 1, 1.0), (1, 2, 1.0)]);
        let mut it = Interner::new();
        let (c, d) = (t1wl_refine(&tri, 1, &[1.0], &mut it), t1wl_refine(&other, 1, &[1.0], &mut it));
        assert_eq!(iso_check(&c, &d).unwrap(), Verdict::NonIsomorphic);
    }

    #[test]
    fn times_separate_otherwise_equal_graphs() {
        let a = graph(3, &[(0, 1, 1.0), (1, 2, 2.0)]);
        let b = graph(3, &[(0, 1, 2.0), (1, 2, 2.0)]);
        let mut it = Interner::new();
        let grid = [1.0, 2.0];
        assert_eq!(iso_check(&t1wl_refine(&a, 2, &grid, &mut it), &t1wl_refine(&b, 2, &grid, &mut it)).unwrap(), Verdict::NonIsomorphic);
    }

    #[test]
    fn rounds_refine_partitions() {
        let g = graph(5, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 2.0), (3, 4, 2.0), (1, 3, 3.0)]);
        let mut it = Interner::new();
        let levels = t1wl_levels(&g, 4, 3.0, &mut it);
        for w in levels.windows(2) {
            for u in 0..5 {
                for v in 0..5 {
                    if w[1][u] == w[1][v] {
                        assert_eq!(w[0][u], w[0][v]);
                    }
                }
            }
        }
    }
}
