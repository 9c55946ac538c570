//! Event feature Φ = [time encoding ‖ sequence encoding ‖ edge features].
//!
//! Both encodings are `cos(freq · gap + phase)` with learnable frequencies and
//! phases; the sequence encoding applies the same family to integer seq gaps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Event;
use crate::nn::{Init, ParamId, ParamStore, Tape, Var};

/// Plain-value cosine encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct CosineEncoding {
    pub freq: Vec<f64>,
    pub phase: Vec<f64>,
}

impl CosineEncoding {
    pub fn dim(&self) -> usize {
        self.freq.len()
    }

    /// Frequencies on a geometric grid over `[1e-3, 1e2] / scale`, phases zero.
    pub fn log_grid(dim: usize, scale: f64) -> Self {
        let scale = if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };
        let freq = (0..dim)
            .map(|i| {
                let e = if dim == 1 { 0.0 } else { -3.0 + 5.0 * i as f64 / (dim - 1) as f64 };
                10f64.powf(e) / scale
            })
            .collect();
        CosineEncoding { freq, phase: vec![0.0; dim] }
    }
}

/// `cos(freq_i · delta + phase_i)` for each component. Negative gaps signal a causality bug.
pub fn time_encode(delta: f64, enc: &CosineEncoding) -> Result<Vec<f64>> {
    if delta < 0.0 || delta.is_nan() {
        return Err(Error::Causality(format!("negative encoding gap {delta}")));
    }
    Ok(enc.freq.iter().zip(&enc.phase).map(|(f, p)| (f * delta + p).cos()).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub time_dim: usize,
    pub seq_dim: usize,
    pub edge_dim: usize,
    /// Append ln(1 + interaction count) of both endpoints.
    #[serde(default)]
    pub interaction_counts: bool,
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        self.time_dim + self.seq_dim + self.edge_dim + if self.interaction_counts { 2 } else { 0 }
    }
}

/// Inputs for one Φ row.
#[derive(Clone, Copy, Debug)]
pub struct PhiInput<'a> {
    pub dt: f64,
    pub ds: f64,
    pub edge_feat: &'a [f64],
    pub counts: (u64, u64),
}

impl<'a> PhiInput<'a> {
    /// Gaps from `e` to the query point (now_t, now_s).
    pub fn between(e: &'a Event, now_t: f64, now_s: u64) -> Result<Self> {
        if now_t < e.time || now_s < e.seq {
            return Err(Error::Causality(format!("event (t={}, s={}) is after the query point (t={now_t}, s={now_s})", e.time, e.seq)));
        }
        Ok(PhiInput { dt: now_t - e.time, ds: (now_s - e.seq) as f64, edge_feat: &e.edge_feat, counts: (0, 0) })
    }
}

/// Learnable Φ, registered in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct EventFeaturizer {
    pub cfg: FeatureConfig,
    time: Option<(ParamId, ParamId)>,
    seq: Option<(ParamId, ParamId)>,
}

impl EventFeaturizer {
    /// `time_scale` / `seq_scale` are typical inter-event gaps used to place the frequency grid.
    pub fn new(store: &mut ParamStore, name: &str, cfg: FeatureConfig, time_scale: f64, seq_scale: f64) -> Result<Self> {
        let mut reg = |part: &str, dim: usize, scale: f64| -> Result<Option<(ParamId, ParamId)>> {
            if dim == 0 {
                return Ok(None);
            }
            let enc = CosineEncoding::log_grid(dim, scale);
            let rng = &mut crate::harness::rng(0);
            let f = store.register(&format!("{name}.{part}.freq"), 1, dim, Init::Values(enc.freq), rng)?;
            let p = store.register(&format!("{name}.{part}.phase"), 1, dim, Init::Values(enc.phase), rng)?;
            Ok(Some((f, p)))
        };
        let time = reg("time", cfg.time_dim, time_scale)?;
        let seq = reg("seq", cfg.seq_dim, seq_scale)?;
        Ok(EventFeaturizer { cfg, time, seq })
    }

    pub fn dim(&self) -> usize {
        self.cfg.dim()
    }

    /// Current parameter values of the (time, sequence) encoders.
    pub fn snapshot(&self, store: &ParamStore) -> (CosineEncoding, CosineEncoding) {
        let get = |pp: Option<(ParamId, ParamId)>| match pp {
            Some((f, p)) => CosineEncoding { freq: store.param(f).value.clone(), phase: store.param(p).value.clone() },
            None => CosineEncoding { freq: vec![], phase: vec![] },
        };
        (get(self.time), get(self.seq))
    }

    /// Plain-value Φ for one event seen from (now_t, now_s).
    pub fn event_feature(&self, store: &ParamStore, e: &Event, now_t: f64, now_s: u64) -> Result<Vec<f64>> {
        let input = PhiInput::between(e, now_t, now_s)?;
        let mut t = Tape::new(store);
        let v = self.encode(&mut t, &[input])?;
        Ok(t.value(v).to_vec())
    }

    /// N×dim matrix of Φ rows; differentiable w.r.t. the encoder parameters.
    pub fn encode(&self, t: &mut Tape, rows: &[PhiInput]) -> Result<Var> {
        let n = rows.len();
        let mut parts = Vec::with_capacity(4);
        for (enc, gap) in [(self.time, 0), (self.seq, 1)] {
            let Some((f, p)) = enc else { continue };
            let mut col = Vec::with_capacity(n);
            for r in rows {
                let g = if gap == 0 { r.dt } else { r.ds };
                if g < 0.0 || g.is_nan() {
                    return Err(Error::Causality(format!("negative encoding gap {g}")));
                }
                col.push(g);
            }
            let gaps = t.constant(n, 1, col)?;
            let (fv, pv) = (t.param(f), t.param(p));
            let arg = t.matmul(gaps, fv)?;
            let arg = t.add_row(arg, pv)?;
            parts.push(t.cos(arg));
        }
        let ed = self.cfg.edge_dim;
        let extra = ed + if self.cfg.interaction_counts { 2 } else { 0 };
        if extra > 0 {
            let mut vals = Vec::with_capacity(n * extra);
            for r in rows {
                if r.edge_feat.len() != ed {
                    return Err(Error::Validation(format!("edge feature arity {} != configured {ed}", r.edge_feat.len())));
                }
                vals.extend_from_slice(r.edge_feat);
                if self.cfg.interaction_counts {
                    vals.push((r.counts.0 as f64).ln_1p());
                    vals.push((r.counts.1 as f64).ln_1p());
                }
            }
            parts.push(t.constant(n, extra, vals)?);
        }
        match parts.len() {
            0 => Ok(t.zeros(n, 0)),
            1 => Ok(parts[0]),
            _ => t.concat(&parts),
        }
    }

    /// Φ of the "no event" placeholder: exactly zero.
    pub fn placeholder(&self, t: &mut Tape) -> Var {
        t.zeros(1, self.dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::check_gradients;
    use std::f64::consts::PI;

    fn featurizer(edge_dim: usize) -> (ParamStore, EventFeaturizer) {
        let mut s = ParamStore::new();
        let cfg = FeatureConfig { time_dim: 4, seq_dim: 3, edge_dim, interaction_counts: false };
        let f = EventFeaturizer::new(&mut s, "phi", cfg, 2.0, 1.0).unwrap();
        (s, f)
    }

    #[test]
    fn zero_gap_zero_phase_is_ones() {
        let enc = CosineEncoding::log_grid(5, 3.0);
        assert_eq!(time_encode(0.0, &enc).unwrap(), vec![1.0; 5]);
    }

    #[test]
    fn cos_pi() {
        let enc = CosineEncoding { freq: vec![PI], phase: vec![0.0] };
        assert_eq!(time_encode(1.0, &enc).unwrap(), vec![-1.0]);
    }

    #[test]
    fn negative_gap_is_causality_error() {
        let enc = CosineEncoding::log_grid(2, 1.0);
        assert!(matches!(time_encode(-0.5, &enc), Err(Error::Causality(_))));
    }

    #[test]
    fn grid_spans_the_configured_decades() {
        let enc = CosineEncoding::log_grid(6, 4.0);
        assert!((enc.freq[0] - 1e-3 / 4.0).abs() < 1e-18);
        assert!((enc.freq[5] - 1e2 / 4.0).abs() < 1e-12);
        assert!(enc.freq.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn own_occurrence_gives_ones_then_features() {
        let (s, f) = featurizer(2);
        let mut e = Event::new(0, 1, 5.0, 9);
        e.edge_feat = vec![0.25, -1.0];
        let phi = f.event_feature(&s, &e, 5.0, 9).unwrap();
        assert_eq!(phi, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.25, -1.0]);
    }

    #[test]
    fn no_edge_features_means_time_plus_seq_dims() {
        let (s, f) = featurizer(0);
        let phi = f.event_feature(&s, &Event::new(0, 1, 1.0, 0), 3.0, 2).unwrap();
        assert_eq!(phi.len(), 7);
    }

    #[test]
    fn arity_mismatch_is_validation_error() {
        let (s, f) = featurizer(2);
        assert!(matches!(f.event_feature(&s, &Event::new(0, 1, 1.0, 0), 2.0, 1), Err(Error::Validation(_))));
    }

    #[test]
    fn placeholder_is_exactly_zero() {
        let (s, f) = featurizer(2);
        let mut t = Tape::new(&s);
        let p = f.placeholder(&mut t);
        assert_eq!(t.value(p), &[0.0; 9]);
    }

    #[test]
    fn shift_invariance_is_bitwise() {
        let (s, f) = featurizer(0);
        let a = f.event_feature(&s, &Event::new(0, 1, 1.25, 3), 4.5, 7).unwrap();
        let b = f.event_feature(&s, &Event::new(0, 1, 1.25 + 64.0, 3), 4.5 + 64.0, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn frequency_gradient_matches_finite_difference() {
        let mut s = ParamStore::new();
        let cfg = FeatureConfig { time_dim: 1, seq_dim: 0, edge_dim: 0, interaction_counts: false };
        let f = EventFeaturizer::new(&mut s, "phi", cfg, 1.0, 1.0).unwrap();
        s.param_mut(s.id("phi.time.freq").unwrap()).value = vec![2.0];
        s.param_mut(s.id("phi.time.phase").unwrap()).value = vec![0.1];
        let report = check_gradients(&mut s, 1e-4, |t| {
            let rows = [PhiInput { dt: 0.3, ds: 0.0, edge_feat: &[], counts: (0, 0) }];
            let v = f.encode(t, &rows)?;
            Ok(t.sum(v))
        })
        .unwrap();
        assert!(report.passed(), "{report:?}");
        // d/dfreq cos(f·0.3 + 0.1) = −0.3·sin(0.7)
        let mut t = Tape::new(&s);
        let v = f.encode(&mut t, &[PhiInput { dt: 0.3, ds: 0.0, edge_feat: &[], counts: (0, 0) }]).unwrap();
        let l = t.sum(v);
        let g = t.backward(l).unwrap();
        let mut probe = s.clone();
        probe.accumulate(&g, 1.0);
        let got = probe.param(probe.id("phi.time.freq").unwrap()).grad[0];
        assert!((got + 0.3 * 0.7f64.sin()).abs() < 1e-14);
    }
}
