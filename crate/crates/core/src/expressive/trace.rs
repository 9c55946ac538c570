use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Isomorphic,
    NonIsomorphic,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Isomorphic => "isomorphic",
            Verdict::NonIsomorphic => "non-isomorphic",
        })
    }
}

/// Per-node colors at every time of a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedTrace {
    pub times: Vec<f64>,
    /// `colors[u][i]` is node u's color at `times[i]`.
    pub colors: Vec<Vec<u64>>,
}

impl StackedTrace {
    pub fn new(times: Vec<f64>, num_nodes: usize) -> Self {
        StackedTrace { colors: vec![Vec::with_capacity(times.len()); num_nodes], times }
    }

    pub fn num_nodes(&self) -> usize {
        self.colors.len()
    }

    pub fn node(&self, u: NodeId) -> &[u64] {
        &self.colors[u as usize]
    }

    /// Node sequences sorted lexicographically: the canonical form compared by [`iso_check`].
    pub fn sorted(&self) -> Vec<&[u64]> {
        let mut rows: Vec<&[u64]> = self.colors.iter().map(Vec::as_slice).collect();
        rows.sort_unstable();
        rows
    }

    /// Colors at grid index `i`, one per node.
    pub fn snapshot(&self, i: usize) -> Vec<u64> {
        self.colors.iter().map(|c| c[i]).collect()
    }
}

/// Sort and scan: isomorphic iff the sorted per-node sequences agree elementwise.
pub fn iso_check(a: &StackedTrace, b: &StackedTrace) -> Result<Verdict> {
    if a.times.len() != b.times.len() {
        return Err(Error::Validation(format!("trace grids differ in length: {} vs {}", a.times.len(), b.times.len())));
    }
    if a.num_nodes() != b.num_nodes() {
        return Ok(Verdict::NonIsomorphic);
    }
    Ok(if a.sorted() == b.sorted() { Verdict::Isomorphic } else { Verdict::NonIsomorphic })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(colors: Vec<Vec<u64>>) -> StackedTrace {
        let n = colors.first().map_or(0, Vec::len);
        StackedTrace { times: (0..n).map(|i| i as f64).collect(), colors }
    }

    #[test]
    fn permuted_rows_are_isomorphic() {
        let a = tr(vec![vec![1, 2], vec![3, 4], vec![1, 2]]);
        let b = tr(vec![vec![3, 4], vec![1, 2], vec![1, 2]]);
        assert_eq!(iso_check(&a, &b).unwrap(), Verdict::Isomorphic);
    }

    #[test]
    fn multiplicity_matters() {
        let a = tr(vec![vec![1, 2], vec![3, 4], vec![3, 4]]);
        let b = tr(vec![vec![3, 4], vec![1, 2], vec![1, 2]]);
        assert_eq!(iso_check(&a, &b).unwrap(), Verdict::NonIsomorphic);
    }

    #[test]
    fn node_count_mismatch_is_non_isomorphic() {
        assert_eq!(iso_check(&tr(vec![vec![1]]), &tr(vec![vec![1], vec![1]])).unwrap(), Verdict::NonIsomorphic);
    }

    #[test]
    fn grid_mismatch_is_validation_error() {
        assert!(matches!(iso_check(&tr(vec![vec![1]]), &tr(vec![vec![1, 1]])), Err(Error::Validation(_))));
    }

    #[test]
    fn verdict_serializes_kebab_case() {
        assert_eq!(serde_json::to_string(&Verdict::NonIsomorphic).unwrap(), "\"non-isomorphic\"");
    }
}
