//! Exact expressiveness engines.
//!
//! Every learnable function of a temporal GNN is replaced by an [`Interner`], which is
//! injective by construction, so two nodes receive equal colors iff the modelled
//! architecture could never separate them. The engines differ only in what they feed
//! the interner:
//!
//! * [`t1wl_refine`]: Temporal-1WL color refinement over timed neighbor multisets;
//! * [`hash_rtr_colors`]: the RTR layer stack (optionally with heterogeneous revision);
//! * [`pint_pos_colors`]: refinement seeded with label-dependent positional counts.
//!
//! [`iso_check`] compares two [`StackedTrace`]s by sort and scan; [`rp_oracle`]
//! supplies ground truth for small graphs. Both graphs of a pair must be traced with
//! the same interner over the same time grid ([`compare`] does this).

mod hash_rtr;
mod intern;
mod oracle;
mod pint;
mod t1wl;
mod trace;
mod view;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use hash_rtr::hash_rtr_colors;
pub use intern::Interner;
pub use oracle::{rp_oracle, rp_oracle_with_budget, ORACLE_MAX_NODES};
pub use pint::{pint_pos_colors, pint_pos_features, PosFeatureMatrix};
pub use t1wl::{t1wl_levels, t1wl_refine};
pub use trace::{iso_check, StackedTrace, Verdict};
pub use view::shared_grid;

use crate::error::{Error, Result};
use crate::graph::{NodeId, TemporalGraph};

/// Default refinement rounds / revision layers.
pub const DEFAULT_DEPTH: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EngineKind {
    #[serde(rename = "t1wl")]
    T1wl,
    #[serde(rename = "rtr")]
    HashRtr,
    #[serde(rename = "rtr-hetero")]
    HashRtrHetero,
    #[serde(rename = "pint-pos")]
    PintPos,
}

impl EngineKind {
    pub const ALL: [EngineKind; 4] = [EngineKind::T1wl, EngineKind::HashRtr, EngineKind::HashRtrHetero, EngineKind::PintPos];

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::T1wl => "t1wl",
            EngineKind::HashRtr => "rtr",
            EngineKind::HashRtrHetero => "rtr-hetero",
            EngineKind::PintPos => "pint-pos",
        }
    }

    /// Whether relabeling nodes can never change the verdict.
    pub fn permutation_invariant(self) -> bool {
        self != EngineKind::PintPos
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EngineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown engine {s:?} (expected t1wl, rtr, rtr-hetero, pint-pos)")))
    }
}

/// One engine with its own interning table.
#[derive(Clone, Debug)]
pub struct Engine {
    pub kind: EngineKind,
    pub depth: usize,
    interner: Interner,
}

impl Engine {
    pub fn new(kind: EngineKind, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("engine depth must be at least 1".into()));
        }
        Ok(Engine { kind, depth, interner: Interner::new() })
    }

    pub fn interner(&self) -> &Interner {
        &self.interner
    }

    pub fn trace(&mut self, g: &TemporalGraph, grid: &[f64]) -> StackedTrace {
        let it = &mut self.interner;
        match self.kind {
            EngineKind::T1wl => t1wl_refine(g, self.depth, grid, it),
            EngineKind::HashRtr => hash_rtr_colors(g, self.depth, false, grid, it),
            EngineKind::HashRtrHetero => hash_rtr_colors(g, self.depth, true, grid, it),
            EngineKind::PintPos => pint_pos_colors(g, self.depth, grid, it),
        }
    }

    /// Trace both graphs over their shared grid and compare.
    pub fn compare(&mut self, a: &TemporalGraph, b: &TemporalGraph) -> Result<Verdict> {
        let grid = shared_grid(a, b);
        let (ta, tb) = (self.trace(a, &grid), self.trace(b, &grid));
        iso_check(&ta, &tb)
    }
}

/// Verdict of a fresh engine on one pair.
pub fn compare(kind: EngineKind, depth: usize, a: &TemporalGraph, b: &TemporalGraph) -> Result<Verdict> {
    Engine::new(kind, depth)?.compare(a, b)
}

/// Whether two candidate links are separable from the traces up to grid index `upto`
/// (inclusive): the unordered endpoint trace pairs differ.
pub fn links_distinguishable(trace: &StackedTrace, a: (NodeId, NodeId), b: (NodeId, NodeId), upto: usize) -> Result<bool> {
    let n = trace.num_nodes() as NodeId;
    if [a.0, a.1, b.0, b.1].iter().any(|&x| x >= n) {
        return Err(Error::Validation(format!("link endpoint outside 0..{n}")));
    }
    if upto >= trace.times.len() {
        return Err(Error::Validation(format!("grid index {upto} outside trace of length {}", trace.times.len())));
    }
    let key = |(u, v): (NodeId, NodeId)| {
        let (x, y) = (&trace.node(u)[..=upto], &trace.node(v)[..=upto]);
        if x <= y {
            (x, y)
        } else {
            (y, x)
        }
    };
    Ok(key(a) != key(b))
}
