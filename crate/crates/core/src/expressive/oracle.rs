use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::expressive::trace::Verdict;
use crate::graph::TemporalGraph;

/// Largest node count the exhaustive oracle accepts.
pub const ORACLE_MAX_NODES: usize = 9;

/// Stacking form: for every ordered node pair, the id of its sorted timed-event multiset.
fn stacking(g: &TemporalGraph, ids: &mut HashMap<Vec<Vec<u64>>, u32>) -> Vec<Vec<u32>> {
    let n = g.num_nodes();
    let mut cells: Vec<Vec<Vec<Vec<u64>>>> = vec![vec![Vec::new(); n]; n];
    for e in g.events() {
        let mut key = vec![e.time.to_bits()];
        key.extend(e.edge_feat.iter().map(|x| x.to_bits()));
        let (u, v) = (e.src as usize, e.dst as usize);
        cells[u][v].push(key.clone());
        if u != v && !g.is_directed() {
            cells[v][u].push(key);
        }
    }
    cells
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|mut c| {
                    c.sort_unstable();
                    let next = ids.len() as u32;
                    *ids.entry(c).or_insert(next)
                })
                .collect()
        })
        .collect()
}

/// Exhaustive isomorphism test: searches for a bijection mapping every timed edge of `a` onto `b`.
/// Refuses graphs above [`ORACLE_MAX_NODES`] rather than guessing.
pub fn rp_oracle(a: &TemporalGraph, b: &TemporalGraph) -> Result<Verdict> {
    rp_oracle_with_budget(a, b, ORACLE_MAX_NODES)
}

/// [`rp_oracle`] with an explicit node budget. The search is exact at any size; the budget
/// only bounds the worst-case factorial running time the caller is willing to accept.
pub fn rp_oracle_with_budget(a: &TemporalGraph, b: &TemporalGraph, max_nodes: usize) -> Result<Verdict> {
    let n = a.num_nodes().max(b.num_nodes());
    if n > max_nodes {
        return Err(Error::OverBudget(format!("oracle limited to {max_nodes} nodes, got {n}")));
    }
    if a.num_nodes() != b.num_nodes() || a.num_events() != b.num_events() || a.is_directed() != b.is_directed() {
        return Ok(Verdict::NonIsomorphic);
    }
    let mut ids = HashMap::new();
    let (pa, pb) = (stacking(a, &mut ids), stacking(b, &mut ids));
    let empty = ids.get(&Vec::new()).copied();
    let profile = |p: &[Vec<u32>], i: usize| {
        let mut out: Vec<u32> = p[i].clone();
        let mut inn: Vec<u32> = p.iter().map(|r| r[i]).collect();
        out.sort_unstable();
        inn.sort_unstable();
        (p[i][i], out, inn)
    };
    let (sa, sb): (Vec<_>, Vec<_>) = ((0..n).map(|i| profile(&pa, i)).collect(), (0..n).map(|j| profile(&pb, j)).collect());
    // Place nodes of `a` so each one is as connected as possible to those already placed;
    // mismatches then surface early in the search.
    let linked = |x: usize, y: usize| Some(pa[x][y]) != empty || Some(pa[y][x]) != empty;
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    for _ in 0..n {
        let next = (0..n)
            .filter(|&x| !placed[x])
            .max_by_key(|&x| (order.iter().filter(|&&y| linked(x, y)).count(), (0..n).filter(|&y| linked(x, y)).count(), std::cmp::Reverse(x)))
            .expect("unplaced node");
        placed[next] = true;
        order.push(next);
    }
    struct Search<'a> {
        pa: &'a [Vec<u32>],
        pb: &'a [Vec<u32>],
        order: &'a [usize],
        ok: &'a dyn Fn(usize, usize) -> bool,
        map: Vec<usize>,
        used: Vec<bool>,
    }
    impl Search<'_> {
        fn run(&mut self, depth: usize) -> bool {
            let Some(&i) = self.order.get(depth) else { return true };
            for j in 0..self.pb.len() {
                if self.used[j] || !(self.ok)(i, j) {
                    continue;
                }
                let clash = self.order[..depth].iter().any(|&x| {
                    let y = self.map[x];
                    self.pa[i][x] != self.pb[j][y] || self.pa[x][i] != self.pb[y][j]
                });
                if clash {
                    continue;
                }
                self.map[i] = j;
                self.used[j] = true;
                if self.run(depth + 1) {
                    return true;
                }
                self.used[j] = false;
            }
            false
        }
    }
    let ok = |i: usize, j: usize| sa[i] == sb[j];
    let mut s = Search { pa: &pa, pb: &pb, order: &order, ok: &ok, map: vec![usize::MAX; n], used: vec![false; n] };
    Ok(if s.run(0) { Verdict::Isomorphic } else { Verdict::NonIsomorphic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphOptions, RawEvent};

    fn graph(n: usize, edges: &[(u32, u32, f64)]) -> TemporalGraph {
        TemporalGraph::from_records(n, edges.iter().map(|&(u, v, t)| RawEvent::new(u, v, t)).collect(), GraphOptions::default()).unwrap()
    }

    #[test]
    fn relabeled_copy_is_isomorphic() {
        let g = graph(5, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 2.0), (3, 4, 2.0), (1, 3, 3.0)]);
        let h = g.relabel(&[4, 2, 0, 1, 3]).unwrap();
        assert_eq!(rp_oracle(&g, &h).unwrap(), Verdict::Isomorphic);
    }

    #[test]
    fn times_must_match_per_edge() {
        let a = graph(3, &[(0, 1, 1.0), (1, 2, 2.0)]);
        let b = graph(3, &[(0, 1, 1.0), (0, 2, 2.0)]);
        assert_eq!(rp_oracle(&a, &b).unwrap(), Verdict::Isomorphic);
        let c = graph(3, &[(0, 1, 2.0), (1, 2, 2.0)]);
        assert_eq!(rp_oracle(&a, &c).unwrap(), Verdict::NonIsomorphic);
    }

    #[test]
    fn oversize_is_refused() {
        let g = graph(10, &[(0, 1, 1.0)]);
        assert!(matches!(rp_oracle(&g, &g), Err(Error::OverBudget(_))));
    }
}
