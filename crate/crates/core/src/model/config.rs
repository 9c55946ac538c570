use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseMode {
    /// Layer-0 states produced by a GRU over the node's events.
    #[default]
    Implicit,
    /// Layer-0 states are free per-node parameters.
    Explicit,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Recurrent temporal revision.
    #[default]
    Rtr,
    /// Attention over neighbor states followed by COMBINE; no hidden state above layer 0.
    Classic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiEvent {
    Sum,
    #[default]
    Mean,
}

/// Ablation switches. Each removes one term of the layer equations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablations {
    /// Replace h_u^k(t⁻) with 0 in the layer update.
    pub no_prev_state: bool,
    /// Replace the node's own revision r_u^k with 0 in the message.
    pub no_revision: bool,
    /// Drop neighbor states h_v^{k-1} from revision rows.
    pub no_h_v: bool,
    /// Drop neighbor state changes Δh_v^{k-1} from revision rows.
    pub no_delta_h: bool,
    /// Drop neighbor revisions r_v^{k-1} from revision rows.
    pub no_r_v: bool,
    /// Drop h_u^{k-1} (the message GRU state) from the message.
    pub no_self_h: bool,
    /// Treat real events like the placeholder in the message (h_v = 0, Φ = 0).
    pub no_msg_event: bool,
}

impl Ablations {
    pub fn any(&self) -> bool {
        *self != Ablations::default()
    }
}

fn d_layers() -> usize {
    1
}
fn d_neighbors() -> usize {
    10
}
fn d_dim() -> usize {
    32
}
fn d_heads() -> usize {
    2
}
fn d_enc() -> usize {
    16
}
fn d_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RtrConfig {
    /// Number of revision layers K (0 = base RNN only).
    #[serde(default = "d_layers")]
    pub layers: usize,
    /// Neighbor cap d.
    #[serde(default = "d_neighbors")]
    pub neighbors: usize,
    /// Hidden size used for every layer unless `dims` is given.
    #[serde(default = "d_dim")]
    pub dim: usize,
    /// Per-layer hidden sizes, length K+1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default = "d_heads")]
    pub heads: usize,
    /// Heterogeneous revision (specialty-set indicator column).
    #[serde(default = "d_true")]
    pub hetero: bool,
    #[serde(default)]
    pub base_mode: BaseMode,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default)]
    pub ablations: Ablations,
    #[serde(default)]
    pub batch_multi_event: MultiEvent,
    #[serde(default = "d_enc")]
    pub time_dim: usize,
    #[serde(default = "d_enc")]
    pub seq_dim: usize,
    #[serde(default)]
    pub interaction_counts: bool,
    /// Static node feature width, concatenated onto every layer's state.
    #[serde(default)]
    pub node_feat_dim: usize,
    /// Decoder hidden width (defaults to the top layer's hidden size).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoder_hidden: Option<usize>,
    /// Score undirected pairs as logit(u,v) + logit(v,u).
    #[serde(default)]
    pub symmetric_decoder: bool,
}

impl Default for RtrConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl RtrConfig {
    pub fn hidden(&self, k: usize) -> usize {
        self.dims.as_ref().map_or(self.dim, |d| d[k])
    }

    pub fn view(&self, k: usize) -> usize {
        self.hidden(k) + self.node_feat_dim
    }

    pub fn decoder_width(&self) -> usize {
        self.decoder_hidden.unwrap_or_else(|| self.hidden(self.layers))
    }

    fn revision_enabled(&self) -> bool {
        self.layers > 0 && self.aggregation == Aggregation::Rtr && !self.ablations.no_revision
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Some(d) = &self.dims {
            if d.len() != self.layers + 1 {
                return bad(format!("dims has {} entries, expected layers + 1 = {}", d.len(), self.layers + 1));
            }
        }
        if (0..=self.layers).any(|k| self.hidden(k) == 0) {
            return bad("hidden sizes must be positive".into());
        }
        if self.neighbors == 0 {
            return bad("neighbors (d) must be at least 1".into());
        }
        if self.heads == 0 {
            return bad("heads must be at least 1".into());
        }
        for k in 1..=self.layers {
            if !self.hidden(k).is_multiple_of(self.heads) {
                return bad(format!("layer {k} size {} not divisible by {} heads", self.hidden(k), self.heads));
            }
        }
        if self.decoder_width() == 0 {
            return bad("decoder_hidden must be positive".into());
        }
        let ab = self.ablations;
        if self.aggregation == Aggregation::Classic && (ab.any() || self.hetero) {
            return bad("ablation flags and hetero apply to rtr aggregation only".into());
        }
        if self.layers == 0 && ab.any() {
            return bad("ablation flags act on layers k >= 1; layers = 0".into());
        }
        if self.hetero && !self.revision_enabled() {
            return bad("hetero requires revision (layers >= 1, rtr aggregation, no_revision off)".into());
        }
        if ab.no_revision && (ab.no_h_v || ab.no_delta_h || ab.no_r_v) {
            return bad("no_revision removes revision entirely; revision-row flags are meaningless with it".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = RtrConfig::default();
        assert_eq!((c.layers, c.neighbors, c.dim, c.heads, c.hetero), (1, 10, 32, 2, true));
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RtrConfig>(r#"{"layerz": 2}"#).is_err());
    }

    #[test]
    fn inconsistent_flags_are_rejected() {
        let no_rev = RtrConfig { ablations: Ablations { no_revision: true, ..Default::default() }, ..Default::default() };
        assert!(no_rev.validate().is_err());
        RtrConfig { hetero: false, ..no_rev.clone() }.validate().unwrap();
        let classic = RtrConfig { aggregation: Aggregation::Classic, ..Default::default() };
        assert!(classic.validate().is_err());
        RtrConfig { hetero: false, ..classic }.validate().unwrap();
        assert!(RtrConfig { layers: 0, ..Default::default() }.validate().is_err());
        RtrConfig { layers: 0, hetero: false, ..Default::default() }.validate().unwrap();
        assert!(RtrConfig { dim: 5, ..Default::default() }.validate().is_err());
        assert!(RtrConfig { dims: Some(vec![4]), ..Default::default() }.validate().is_err());
    }
}
