use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::params::{Init, ParamId, ParamStore};
use crate::nn::tape::{Tape, Var};

/// `y = x W + b`, applied row-wise.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut R) -> Result<Self> {
        let w = store.register(&format!("{name}.w"), in_dim, out_dim, Init::Glorot, rng)?;
        let b = store.register(&format!("{name}.b"), 1, out_dim, Init::Zeros, rng)?;
        Ok(Linear { w, b, in_dim, out_dim })
    }

    pub fn forward(&self, t: &mut Tape, x: Var) -> Result<Var> {
        let (w, b) = (t.param(self.w), t.param(self.b));
        let y = t.matmul(x, w)?;
        t.add_row(y, b)
    }
}

/// Standard GRU cell with fused input/recurrent projections:
/// `z = σ(W_z x + U_z h + b_z)`, `r = σ(W_r x + U_r h + b_r)`,
/// `ĥ = tanh(W_h x + U_h (r ⊙ h) + b_h)`, `h' = (1 − z) ⊙ h + z ⊙ ĥ`.
#[derive(Clone, Debug)]
pub struct GruCell {
    w: ParamId,
    u_zr: ParamId,
    u_h: ParamId,
    b: ParamId,
    pub in_dim: usize,
    pub hidden: usize,
}

impl GruCell {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, in_dim: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let w = store.register(&format!("{name}.w"), in_dim, 3 * hidden, Init::Glorot, rng)?;
        let u_zr = store.register(&format!("{name}.u_zr"), hidden, 2 * hidden, Init::Glorot, rng)?;
        let u_h = store.register(&format!("{name}.u_h"), hidden, hidden, Init::Glorot, rng)?;
        let b = store.register(&format!("{name}.b"), 1, 3 * hidden, Init::Zeros, rng)?;
        Ok(GruCell { w, u_zr, u_h, b, in_dim, hidden })
    }

    /// `h`: n×hidden state, `x`: n×in input.
    pub fn forward(&self, t: &mut Tape, h: Var, x: Var) -> Result<Var> {
        let hd = self.hidden;
        if t.shape(h).1 != hd || t.shape(x).1 != self.in_dim {
            return Err(Error::Shape { op: "gru_cell", lhs: t.shape(h), rhs: t.shape(x) });
        }
        let (w, u_zr, u_h, b) = (t.param(self.w), t.param(self.u_zr), t.param(self.u_h), t.param(self.b));
        let xw = t.matmul(x, w)?;
        let xw = t.add_row(xw, b)?;
        let hu = t.matmul(h, u_zr)?;
        let (xz, xr, xh) = (t.slice(xw, 0, hd)?, t.slice(xw, hd, hd)?, t.slice(xw, 2 * hd, hd)?);
        let (hz, hr) = (t.slice(hu, 0, hd)?, t.slice(hu, hd, hd)?);
        let z = t.add(xz, hz)?;
        let z = t.sigmoid(z);
        let r = t.add(xr, hr)?;
        let r = t.sigmoid(r);
        let rh = t.mul(r, h)?;
        let rhu = t.matmul(rh, u_h)?;
        let cand = t.add(xh, rhu)?;
        let cand = t.tanh(cand);
        let diff = t.sub(cand, h)?;
        let step = t.mul(z, diff)?;
        t.add(h, step)
    }
}

/// Multi-head scaled dot-product self-attention over the rows of `Z`, mean-pooled
/// to one vector and projected: `mean_rows(concat_h softmax(Q_h K_hᵀ/√d_h) V_h) W_o + b_o`.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    wqkv: ParamId,
    out: Linear,
    pub in_dim: usize,
    pub key_dim: usize,
    pub heads: usize,
}

impl MultiHeadAttention {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, in_dim: usize, key_dim: usize, out_dim: usize, heads: usize, rng: &mut R) -> Result<Self> {
        if heads == 0 || !key_dim.is_multiple_of(heads) {
            return Err(Error::Config(format!("{name}: key dim {key_dim} not divisible by {heads} heads")));
        }
        let wqkv = store.register(&format!("{name}.wqkv"), in_dim, 3 * key_dim, Init::Glorot, rng)?;
        let out = Linear::new(store, &format!("{name}.out"), key_dim, out_dim, rng)?;
        Ok(MultiHeadAttention { wqkv, out, in_dim, key_dim, heads })
    }

    pub fn out_dim(&self) -> usize {
        self.out.out_dim
    }

    /// `z`: N×in with N ≥ 1; returns 1×out.
    pub fn forward(&self, t: &mut Tape, z: Var) -> Result<Var> {
        let (n, c) = t.shape(z);
        if n == 0 || c != self.in_dim {
            return Err(Error::Shape { op: "multihead_attention", lhs: (n, c), rhs: (1, self.in_dim) });
        }
        let dk = self.key_dim;
        let dh = dk / self.heads;
        let w = t.param(self.wqkv);
        let qkv = t.matmul(z, w)?;
        let mut heads = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let q = t.slice(qkv, h * dh, dh)?;
            let k = t.slice(qkv, dk + h * dh, dh)?;
            let v = t.slice(qkv, 2 * dk + h * dh, dh)?;
            let s = t.matmul_t(q, k)?;
            let s = t.scale(s, 1.0 / (dh as f64).sqrt());
            let a = t.softmax(s);
            heads.push(t.matmul(a, v)?);
        }
        let cat = if heads.len() == 1 { heads[0] } else { t.concat(&heads)? };
        // Mean pooling commutes with the affine output projection.
        let pooled = t.mean_rows(cat)?;
        self.out.forward(t, pooled)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::rng;
    use crate::nn::gradcheck::check_gradients;

    #[test]
    fn gru_zero_params_halves_state() {
        let mut s = ParamStore::new();
        let g = GruCell::new(&mut s, "g", 3, 2, &mut rng(0)).unwrap();
        s.zero_values();
        let mut t = Tape::new(&s);
        let h = t.row(vec![0.8, -0.4]);
        let x = t.row(vec![1.0, 2.0, 3.0]);
        let y = g.forward(&mut t, h, x).unwrap();
        assert_eq!(t.value(y), &[0.4, -0.2]);
    }

    #[test]
    fn gru_fixed_point_at_zero() {
        let mut s = ParamStore::new();
        let g = GruCell::new(&mut s, "g", 3, 4, &mut rng(5)).unwrap();
        let mut t = Tape::new(&s);
        let h = t.zeros(1, 4);
        let x = t.zeros(1, 3);
        let y = g.forward(&mut t, h, x).unwrap();
        assert!(t.value(y).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gru_dim_mismatch_is_typed() {
        let mut s = ParamStore::new();
        let g = GruCell::new(&mut s, "g", 3, 4, &mut rng(5)).unwrap();
        let mut t = Tape::new(&s);
        let h = t.zeros(1, 3);
        let x = t.zeros(1, 3);
        assert!(matches!(g.forward(&mut t, h, x), Err(Error::Shape { op: "gru_cell", .. })));
    }

    #[test]
    fn gru_gradients_match_finite_differences() {
        let mut s = ParamStore::new();
        let mut r = rng(11);
        let g = GruCell::new(&mut s, "g", 4, 4, &mut r).unwrap();
        for (_, p) in s.clone().iter() {
            let id = s.id(&p.name).unwrap();
            s.param_mut(id).value.iter_mut().for_each(|v| *v = r.random_range(-0.8..0.8));
        }
        let h0: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
        let x0: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
        let report = check_gradients(&mut s, 1e-4, |t| {
            let h = t.row(h0.clone());
            let x = t.row(x0.clone());
            let y = g.forward(t, h, x)?;
            let sq = t.mul(y, y)?;
            Ok(t.sum(sq))
        })
        .unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.checked, s.num_scalars());
    }

    #[test]
    fn attention_singleton_returns_value_projection() {
        let mut s = ParamStore::new();
        let a = MultiHeadAttention::new(&mut s, "a", 3, 4, 2, 2, &mut rng(1)).unwrap();
        let mut t = Tape::new(&s);
        let z = t.row(vec![0.3, -1.0, 2.0]);
        let y = a.forward(&mut t, z).unwrap();
        // With one key the attention weight is 1, so the output is V W_o + b_o.
        let wqkv = &s.param(s.id("a.wqkv").unwrap()).value;
        let v: Vec<f64> = (0..4).map(|j| (0..3).map(|i| t.value(z)[i] * wqkv[i * 12 + 8 + j]).sum()).collect();
        let wo = &s.param(s.id("a.out.w").unwrap()).value;
        let want: Vec<f64> = (0..2).map(|j| (0..4).map(|i| v[i] * wo[i * 2 + j]).sum()).collect();
        for (got, want) in t.value(y).iter().zip(&want) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_duplicate_identical_rows() {
        let mut s = ParamStore::new();
        let a = MultiHeadAttention::new(&mut s, "a", 3, 4, 4, 2, &mut rng(2)).unwrap();
        let mut t = Tape::new(&s);
        let z1 = t.constant(2, 3, vec![0.5, 0.1, -0.2, 0.5, 0.1, -0.2]).unwrap();
        let z2 = t.constant(3, 3, [0.5, 0.1, -0.2].repeat(3)).unwrap();
        let (y1, y2) = (a.forward(&mut t, z1).unwrap(), a.forward(&mut t, z2).unwrap());
        for (p, q) in t.value(y1).iter().zip(t.value(y2)) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_rejects_bad_heads() {
        let mut s = ParamStore::new();
        assert!(MultiHeadAttention::new(&mut s, "a", 3, 5, 4, 2, &mut rng(2)).is_err());
    }

    #[test]
    fn attention_gradients_match_finite_differences() {
        let mut s = ParamStore::new();
        let mut r = rng(4);
        let a = MultiHeadAttention::new(&mut s, "a", 5, 4, 3, 2, &mut r).unwrap();
        let z: Vec<f64> = (0..20).map(|_| r.random_range(-1.0..1.0)).collect();
        let report = check_gradients(&mut s, 1e-4, |t| {
            let zv = t.constant(4, 5, z.clone())?;
            let y = a.forward(t, zv)?;
            let y = t.tanh(y);
            Ok(t.sum(y))
        })
        .unwrap();
        assert!(report.passed(), "{report:?}");
    }
}
