use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::codec::{Reader, Writer};
use crate::nn::tape::Gradients;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug)]
pub enum Init {
    Zeros,
    /// Uniform in ±sqrt(6 / (fan_in + fan_out)).
    Glorot,
    Uniform(f64),
    Values(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub(crate) m: Vec<f64>,
    pub(crate) v: Vec<f64>,
}

/// Named parameter tensors with gradient and Adam moment buffers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    index: BTreeMap<String, ParamId>,
    pub(crate) step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<R: Rng>(&mut self, name: &str, rows: usize, cols: usize, init: Init, rng: &mut R) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::Config(format!("parameter {name:?} registered twice")));
        }
        let n = rows * cols;
        let value = match init {
            Init::Zeros => vec![0.0; n],
            Init::Glorot => {
                let lim = (6.0 / (rows + cols).max(1) as f64).sqrt();
                (0..n).map(|_| rng.random_range(-lim..=lim)).collect()
            }
            Init::Uniform(lim) => (0..n).map(|_| rng.random_range(-lim..=lim)).collect(),
            Init::Values(v) => {
                if v.len() != n {
                    return Err(Error::Shape { op: "register", lhs: (rows, cols), rhs: (v.len(), 1) });
                }
                v
            }
        };
        let id = ParamId(self.params.len());
        self.params.push(Param { name: name.to_string(), rows, cols, value, grad: vec![0.0; n], m: vec![0.0; n], v: vec![0.0; n] });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn param_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Add a backward pass's gradients, scaled by `w`.
    pub fn accumulate(&mut self, g: &Gradients, w: f64) {
        for (id, row, vals) in &g.entries {
            let p = &mut self.params[id.0];
            let off = row.map_or(0, |r| r * p.cols);
            p.grad[off..off + vals.len()].iter_mut().zip(vals).for_each(|(a, b)| *a += w * b);
        }
    }

    /// Set every scalar to zero (used by analytic tests).
    pub fn zero_values(&mut self) {
        for p in &mut self.params {
            p.value.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        w.u64(self.step);
        w.u32(self.params.len() as u32);
        for p in &self.params {
            w.str(&p.name);
            w.u32(p.rows as u32);
            w.u32(p.cols as u32);
            w.f64s(&p.value);
            w.f64s(&p.m);
            w.f64s(&p.v);
        }
    }

    pub(crate) fn read(r: &mut Reader) -> Result<Self> {
        let step = r.u64()?;
        let n = r.u32()? as usize;
        let mut s = ParamStore { step, ..Default::default() };
        for _ in 0..n {
            let name = r.str()?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let value = r.f64s()?;
            let m = r.f64s()?;
            let v = r.f64s()?;
            if [value.len(), m.len(), v.len()].iter().any(|&l| l != rows * cols) {
                return Err(Error::Checkpoint(format!("tensor {name:?}: buffer length does not match shape {rows}x{cols}")));
            }
            if s.index.insert(name.clone(), ParamId(s.params.len())).is_some() {
                return Err(Error::Checkpoint(format!("duplicate tensor {name:?}")));
            }
            s.params.push(Param { name, rows, cols, grad: vec![0.0; value.len()], value, m, v });
        }
        Ok(s)
    }

    /// Checks that `other` declares the same tensors (names and shapes), in order.
    pub fn same_layout(&self, other: &ParamStore) -> bool {
        self.params.len() == other.params.len() && self.params.iter().zip(&other.params).all(|(a, b)| a.name == b.name && a.rows == b.rows && a.cols == b.cols)
    }
}
