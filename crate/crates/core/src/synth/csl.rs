use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphOptions, NodeId, RawEvent, TemporalGraph};

/// Circular skip link graph C_{N,s}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CslSpec {
    pub n: usize,
    pub skip: usize,
}

impl CslSpec {
    pub fn new(n: usize, skip: usize) -> Result<Self> {
        if skip < 2 || 2 * skip >= n {
            return Err(Error::Validation(format!("CSL skip {skip} must satisfy 2 <= s < N/2 (N = {n})")));
        }
        Ok(CslSpec { n, skip })
    }
}

/// Ring edges {i, i+1} for all i, then skip edges {i, i+s}, both mod N.
pub fn gen_csl(spec: CslSpec) -> Vec<(NodeId, NodeId)> {
    let n = spec.n;
    let ring = (0..n).map(|i| (i, (i + 1) % n));
    let skip = (0..n).map(|i| (i, (i + spec.skip) % n));
    ring.chain(skip).map(|(a, b)| (a as NodeId, b as NodeId)).collect()
}

/// A one-snapshot temporal graph of C_{N,s} at time `t`.
pub fn csl_snapshot(spec: CslSpec, t: f64) -> TemporalGraph {
    let raw = gen_csl(spec).into_iter().map(|(a, b)| RawEvent::new(a, b, t)).collect();
    TemporalGraph::from_records(spec.n, raw, GraphOptions::default()).expect("CSL edges are valid")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OscillationSpec {
    pub n: usize,
    pub skips: (usize, usize),
    /// Number of snapshots.
    pub length: usize,
}

/// Snapshots alternate s₁, s₂, … at times 1..=length; seq follows canonical edge order.
pub fn oscillating_csl(spec: OscillationSpec, reversed: bool) -> Result<TemporalGraph> {
    let (a, b) = if reversed { (spec.skips.1, spec.skips.0) } else { spec.skips };
    let (ca, cb) = (CslSpec::new(spec.n, a)?, CslSpec::new(spec.n, b)?);
    let mut raw = Vec::with_capacity(spec.length * 2 * spec.n);
    for i in 0..spec.length {
        let t = (i + 1) as f64;
        let cs = if i % 2 == 0 { ca } else { cb };
        raw.extend(gen_csl(cs).into_iter().map(|(u, v)| RawEvent::new(u, v, t)));
    }
    TemporalGraph::from_records(spec.n, raw, GraphOptions::default())
}

/// Uniformly random relabeling that is not an automorphism of `g` (so label-dependent
/// features see a genuinely different numbering).
pub fn non_trivial_relabel<R: Rng>(g: &TemporalGraph, rng: &mut R) -> Result<TemporalGraph> {
    let n = g.num_nodes();
    let mut perm: Vec<NodeId> = (0..n as NodeId).collect();
    let canon = |h: &TemporalGraph| {
        let mut es: Vec<(u64, NodeId, NodeId)> = h.events().iter().map(|e| (e.time.to_bits(), e.src.min(e.dst), e.src.max(e.dst))).collect();
        es.sort_unstable();
        es
    };
    let base = canon(g);
    for _ in 0..1000 {
        perm.shuffle(rng);
        let h = g.relabel(&perm)?;
        if n < 2 || canon(&h) != base {
            return Ok(h);
        }
    }
    Err(Error::Validation("every sampled relabeling was an automorphism".into()))
}

/// The forward/reversed pair; the partner is relabeled. Label: non-isomorphic iff s₁ ≠ s₂.
pub fn gen_oscillating_csl<R: Rng>(spec: OscillationSpec, rng: &mut R) -> Result<(TemporalGraph, TemporalGraph, bool)> {
    let a = oscillating_csl(spec, false)?;
    let b = non_trivial_relabel(&oscillating_csl(spec, true)?, rng)?;
    Ok((a, b, spec.skips.0 != spec.skips.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c11_2_is_four_regular_with_22_edges() {
        let e = gen_csl(CslSpec::new(11, 2).unwrap());
        assert_eq!(e.len(), 22);
        let mut deg = [0; 11];
        for (a, b) in e {
            deg[a as usize] += 1;
            deg[b as usize] += 1;
        }
        assert!(deg.iter().all(|&d| d == 4));
    }

    #[test]
    fn rotation_maps_edge_set_to_itself() {
        let spec = CslSpec::new(11, 3).unwrap();
        let canon = |es: Vec<(NodeId, NodeId)>| {
            let mut v: Vec<_> = es.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
            v.sort_unstable();
            v
        };
        let base = canon(gen_csl(spec));
        for r in 0..11 {
            let rot = gen_csl(spec).into_iter().map(|(a, b)| ((a + r) % 11, (b + r) % 11)).collect();
            assert_eq!(canon(rot), base);
        }
    }

    #[test]
    fn invalid_skips_are_rejected() {
        assert!(CslSpec::new(11, 1).is_err());
        assert!(CslSpec::new(11, 6).is_err());
        assert!(CslSpec::new(10, 5).is_err());
    }

    #[test]
    fn oscillation_alternates_and_orders_snapshots() {
        let g = oscillating_csl(OscillationSpec { n: 7, skips: (2, 3), length: 3 }, false).unwrap();
        assert_eq!(g.num_events(), 42);
        assert_eq!(g.timestamps(), vec![1.0, 2.0, 3.0]);
        let e = &g.events()[7];
        assert_eq!((e.src, e.dst, e.time), (0, 2, 1.0));
        let e = &g.events()[14 + 7];
        assert_eq!((e.src, e.dst, e.time), (0, 3, 2.0));
    }
}
