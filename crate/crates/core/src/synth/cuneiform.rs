use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphOptions, NodeId, RawEvent, TemporalGraph};

/// Tetrahedra whose centers are joined by arrangement edges (at most two per center).
/// Tetrahedron i occupies nodes 4i..4i+3 with center 4i; its wedge edges occur at `times[i]`,
/// all arrangement edges at time 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sign {
    pub times: Vec<u32>,
    pub arrangement: Vec<(usize, usize)>,
}

impl Sign {
    pub fn tetrahedra(&self) -> usize {
        self.times.len()
    }

    pub fn num_nodes(&self) -> usize {
        4 * self.times.len()
    }

    fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.tetrahedra()];
        for &(a, b) in &self.arrangement {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.tetrahedra();
        if self.times.contains(&0) {
            return Err(Error::Validation("wedge times must be >= 1 (time 0 is the arrangement)".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(a, b) in &self.arrangement {
            if a >= t || b >= t || a == b || !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::Validation(format!("bad arrangement edge ({a}, {b})")));
            }
        }
        if self.degrees().iter().any(|&d| d > 2) {
            return Err(Error::Validation("a center has more than two arrangement edges".into()));
        }
        Ok(())
    }

    pub fn to_graph(&self) -> TemporalGraph {
        let mut raw: Vec<RawEvent> = self.arrangement.iter().map(|&(a, b)| RawEvent::new(4 * a as NodeId, 4 * b as NodeId, 0.0)).collect();
        for (i, &t) in self.times.iter().enumerate() {
            let base = 4 * i as NodeId;
            for a in 0..4 {
                for b in a + 1..4 {
                    raw.push(RawEvent::new(base + a, base + b, t as f64));
                }
            }
        }
        TemporalGraph::from_records(self.num_nodes(), raw, GraphOptions::default()).expect("sign edges are valid")
    }

    /// Canonical form: sorted components, each a path or cycle of wedge times in its
    /// lexicographically least orientation. Equal descriptors ⟺ isomorphic signs.
    pub fn descriptor(&self) -> Vec<Vec<u32>> {
        let t = self.tetrahedra();
        let mut adj = vec![Vec::new(); t];
        for &(a, b) in &self.arrangement {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; t];
        let mut comps = Vec::new();
        let walk = |start: usize, seen: &mut Vec<bool>| {
            let mut order = vec![start];
            seen[start] = true;
            let mut cur = start;
            while let Some(&next) = adj[cur].iter().find(|&&x| !seen[x]) {
                seen[next] = true;
                order.push(next);
                cur = next;
            }
            order
        };
        for s in (0..t).filter(|&i| adj[i].len() < 2) {
            if !seen[s] {
                let seq: Vec<u32> = walk(s, &mut seen).iter().map(|&i| self.times[i]).collect();
                let rev: Vec<u32> = seq.iter().rev().copied().collect();
                let mut c = vec![0];
                c.extend(seq.min(rev));
                comps.push(c);
            }
        }
        for s in 0..t {
            if !seen[s] {
                let seq: Vec<u32> = walk(s, &mut seen).iter().map(|&i| self.times[i]).collect();
                let n = seq.len();
                let best = (0..n)
                    .flat_map(|r| {
                        let fwd: Vec<u32> = (0..n).map(|j| seq[(r + j) % n]).collect();
                        let bwd: Vec<u32> = (0..n).map(|j| seq[(r + n - j) % n]).collect();
                        [fwd, bwd]
                    })
                    .min()
                    .expect("non-empty cycle");
                let mut c = vec![1];
                c.extend(best);
                comps.push(c);
            }
        }
        comps.sort();
        comps
    }

    /// Disjoint cycles of the given lengths; wedge time of position p in a cycle is 1 + (p mod period).
    pub fn cycles(lengths: &[usize], period: u32) -> Self {
        let mut times = Vec::new();
        let mut arrangement = Vec::new();
        for &len in lengths {
            let base = times.len();
            for p in 0..len {
                times.push(1 + (p as u32) % period);
                arrangement.push((base + p, base + (p + 1) % len));
            }
        }
        Sign { times, arrangement }
    }
}

/// Two triangles versus a hexagon over the same six tetrahedra.
pub fn fig4_fixture() -> (Sign, Sign) {
    (Sign::cycles(&[3, 3], 3), Sign::cycles(&[6], 3))
}

/// Non-isomorphic pairs of 2-regular arrangements that look locally identical.
pub fn hard_family() -> Vec<(&'static str, Sign, Sign)> {
    vec![
        ("3+3/6", Sign::cycles(&[3, 3], 3), Sign::cycles(&[6], 3)),
        ("3+4/7", Sign::cycles(&[3, 4], 1), Sign::cycles(&[7], 1)),
        ("4+4/8", Sign::cycles(&[4, 4], 2), Sign::cycles(&[8], 2)),
        ("3+5/8", Sign::cycles(&[3, 5], 1), Sign::cycles(&[8], 1)),
    ]
}

/// Longest arrangement cycle a random sign may contain.
const MAX_RANDOM_CYCLE: usize = 4;

fn path_len(arr: &[(usize, usize)], t: usize, a: usize, b: usize) -> Option<usize> {
    let mut adj = vec![Vec::new(); t];
    for &(x, y) in arr {
        adj[x].push(y);
        adj[y].push(x);
    }
    let mut dist = vec![usize::MAX; t];
    let mut queue = std::collections::VecDeque::from([a]);
    dist[a] = 0;
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
        }
    }
    (dist[b] != usize::MAX).then_some(dist[b])
}

fn can_add(arr: &[(usize, usize)], deg: &[usize], t: usize, a: usize, b: usize) -> bool {
    a != b
        && deg[a] < 2
        && deg[b] < 2
        && !arr.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a))
        && path_len(arr, t, a, b).is_none_or(|d| d < MAX_RANDOM_CYCLE)
}

pub fn random_sign<R: Rng>(tetra: usize, groups: u32, rng: &mut R) -> Sign {
    let mut times: Vec<u32> = (0..tetra).map(|i| 1 + (i as u32) % groups.max(1)).collect();
    times.shuffle(rng);
    let target = rng.random_range(tetra / 2..=tetra);
    let mut cands: Vec<(usize, usize)> = (0..tetra).flat_map(|a| (a + 1..tetra).map(move |b| (a, b))).collect();
    cands.shuffle(rng);
    let mut arrangement = Vec::new();
    let mut deg = vec![0; tetra];
    for (a, b) in cands {
        if arrangement.len() >= target {
            break;
        }
        if can_add(&arrangement, &deg, tetra, a, b) {
            arrangement.push((a, b));
            deg[a] += 1;
            deg[b] += 1;
        }
    }
    Sign { times, arrangement }
}

/// One local edit: swap two differing wedge times, or move one arrangement edge.
fn modify<R: Rng>(s: &Sign, rng: &mut R) -> Sign {
    let mut out = s.clone();
    let t = s.tetrahedra();
    if rng.random_bool(0.5) || s.arrangement.is_empty() {
        let (i, j) = (rng.random_range(0..t), rng.random_range(0..t));
        out.times.swap(i, j);
    } else {
        out.arrangement.remove(rng.random_range(0..out.arrangement.len()));
        let deg = out.degrees();
        let mut cands: Vec<(usize, usize)> = (0..t).flat_map(|a| (a + 1..t).map(move |b| (a, b))).collect();
        cands.shuffle(rng);
        if let Some(&(a, b)) = cands.iter().find(|&&(a, b)| can_add(&out.arrangement, &deg, t, a, b)) {
            out.arrangement.push((a, b));
        }
    }
    out
}

/// A sign with the same tetrahedron count that is not isomorphic to `s`; local edits are
/// tried first, then fresh draws. `None` if the size admits no distinct sign in reach.
pub fn non_isomorphic_partner<R: Rng>(s: &Sign, groups: u32, rng: &mut R) -> Option<Sign> {
    let d = s.descriptor();
    for _ in 0..64 {
        let c = modify(s, rng);
        if c.descriptor() != d && c.arrangement.len() == s.arrangement.len() {
            return Some(c);
        }
    }
    (0..256).map(|_| random_sign(s.tetrahedra(), groups, rng)).find(|c| c.descriptor() != d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuneiformConfig {
    pub pairs: usize,
    /// Fraction of isomorphic (relabeled copy) pairs.
    pub iso_fraction: f64,
    /// Fraction of non-isomorphic pairs drawn from [`hard_family`].
    pub hard_fraction: f64,
    pub min_tetra: usize,
    pub max_tetra: usize,
    /// Number of distinct wedge times in random signs.
    pub groups: u32,
}

impl Default for CuneiformConfig {
    fn default() -> Self {
        CuneiformConfig { pairs: 120, iso_fraction: 0.3, hard_fraction: 0.2, min_tetra: 2, max_tetra: 8, groups: 3 }
    }
}

/// One generated pair with its ground truth from canonical descriptors.
#[derive(Clone, Debug)]
pub struct SignPair {
    pub kind: String,
    pub a: Sign,
    pub b: Sign,
    pub non_isomorphic: bool,
}

pub fn gen_cuneiform_like<R: Rng>(cfg: &CuneiformConfig, rng: &mut R) -> Result<Vec<SignPair>> {
    if cfg.pairs < 2 || cfg.min_tetra < 2 || cfg.max_tetra < cfg.min_tetra || cfg.groups == 0 {
        return Err(Error::Config("cuneiform: need pairs >= 2, 2 <= min_tetra <= max_tetra, groups >= 1".into()));
    }
    if !(0.0..=1.0).contains(&cfg.iso_fraction) || !(0.0..=1.0).contains(&cfg.hard_fraction) {
        return Err(Error::Config("cuneiform: fractions must lie in [0, 1]".into()));
    }
    let n_iso = (cfg.pairs as f64 * cfg.iso_fraction).round() as usize;
    let n_non = cfg.pairs - n_iso;
    let hard: Vec<_> = hard_family().into_iter().filter(|(_, a, _)| a.tetrahedra() <= cfg.max_tetra).collect();
    let n_hard = if hard.is_empty() { 0 } else { (n_non as f64 * cfg.hard_fraction).round() as usize };
    let mut out = Vec::with_capacity(cfg.pairs);
    for i in 0..n_hard {
        let (name, a, b) = &hard[i % hard.len()];
        let (a, b) = if rng.random_bool(0.5) { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
        out.push(SignPair { kind: format!("hard:{name}"), a, b, non_isomorphic: true });
    }
    let mut misses = 0;
    while out.len() < n_non {
        let t = rng.random_range(cfg.min_tetra..=cfg.max_tetra);
        let a = random_sign(t, cfg.groups, rng);
        match non_isomorphic_partner(&a, cfg.groups, rng) {
            Some(b) => out.push(SignPair { kind: "edit".into(), non_isomorphic: true, a, b }),
            None if misses < 1000 => misses += 1,
            None => return Err(Error::Config("cuneiform: tetrahedron range admits no non-isomorphic pairs".into())),
        }
    }
    for _ in 0..n_iso {
        let t = rng.random_range(cfg.min_tetra..=cfg.max_tetra);
        let a = random_sign(t, cfg.groups, rng);
        out.push(SignPair { kind: "copy".into(), b: a.clone(), a, non_isomorphic: false });
    }
    out.shuffle(rng);
    Ok(out)
}

/// Graph of `s` under a uniformly random node relabeling.
pub fn shuffled_graph<R: Rng>(s: &Sign, rng: &mut R) -> TemporalGraph {
    let mut perm: Vec<NodeId> = (0..s.num_nodes() as NodeId).collect();
    perm.shuffle(rng);
    s.to_graph().relabel(&perm).expect("valid permutation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::rng;

    #[test]
    fn fixture_shapes() {
        let (a, b) = fig4_fixture();
        a.validate().unwrap();
        b.validate().unwrap();
        assert_eq!(a.to_graph().num_events(), 6 + 36);
        assert_ne!(a.descriptor(), b.descriptor());
    }

    #[test]
    fn descriptor_ignores_center_numbering() {
        let a = Sign { times: vec![1, 2, 3], arrangement: vec![(0, 1), (1, 2)] };
        let b = Sign { times: vec![3, 2, 1], arrangement: vec![(2, 1), (0, 1)] };
        assert_eq!(a.descriptor(), b.descriptor());
        let c = Sign { times: vec![2, 1, 3], arrangement: vec![(0, 1), (1, 2)] };
        assert_ne!(a.descriptor(), c.descriptor());
    }

    #[test]
    fn random_signs_respect_the_degree_cap() {
        let mut r = rng(3);
        for t in 2..9 {
            let s = random_sign(t, 3, &mut r);
            s.validate().unwrap();
        }
    }

    #[test]
    fn class_balance_follows_config() {
        let cfg = CuneiformConfig { pairs: 50, iso_fraction: 0.4, ..Default::default() };
        let pairs = gen_cuneiform_like(&cfg, &mut rng(1)).unwrap();
        assert_eq!(pairs.len(), 50);
        assert_eq!(pairs.iter().filter(|p| !p.non_isomorphic).count(), 20);
    }
}
