//! Reverse-mode differentiation over dense row-major matrices.
//!
//! A [`Tape`] records every op as a node holding its forward value. Parameters enter
//! through [`Tape::param`] / [`Tape::param_row`] and receive gradients on
//! [`Tape::backward`]; constants never do, which is how stop-gradient is expressed.

use crate::error::{Error, Result};
use crate::nn::params::{ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(u32);

#[derive(Clone, Debug)]
enum Op {
    Const,
    Param(ParamId),
    ParamRow(ParamId, usize),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Concat(Vec<Var>),
    Stack(Vec<Var>),
    Slice(Var, usize),
    Sum(Var),
    Mean(Var),
    MeanRows(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Cos(Var),
    Softmax(Var),
    Scale(Var, f64),
    BceLogits(Var, f64),
}

struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
    tracked: bool,
}

/// Gradients produced by one backward pass, keyed by parameter.
#[derive(Debug, Default)]
pub struct Gradients {
    pub(crate) entries: Vec<(ParamId, Option<usize>, Vec<f64>)>,
}

impl Gradients {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub struct Tape<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

impl<'p> Tape<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Tape { store, nodes: Vec::new(), param_vars: vec![None; store.len()] }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op, tracked: bool) -> Var {
        debug_assert_eq!(rows * cols, value.len());
        self.nodes.push(Node { rows, cols, value, op, tracked });
        Var(self.nodes.len() as u32 - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0 as usize]
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = self.node(v);
        (n.rows, n.cols)
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.node(v).value[0]
    }

    fn tracked(&self, v: Var) -> bool {
        self.node(v).tracked
    }

    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Result<Var> {
        if rows * cols != value.len() {
            return Err(Error::Shape { op: "constant", lhs: (rows, cols), rhs: (value.len(), 1) });
        }
        Ok(self.push(rows, cols, value, Op::Const, false))
    }

    pub fn row(&mut self, value: Vec<f64>) -> Var {
        let n = value.len();
        self.push(1, n, value, Op::Const, false)
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.push(rows, cols, vec![0.0; rows * cols], Op::Const, false)
    }

    /// Whole parameter tensor; one node per parameter per tape.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let p = self.store.param(id);
        let v = self.push(p.rows, p.cols, p.value.clone(), Op::Param(id), true);
        self.param_vars[id.0] = Some(v);
        v
    }

    /// One row of a parameter matrix (embedding lookup).
    pub fn param_row(&mut self, id: ParamId, row: usize) -> Result<Var> {
        let p = self.store.param(id);
        if row >= p.rows {
            return Err(Error::Shape { op: "param_row", lhs: (p.rows, p.cols), rhs: (row, 0) });
        }
        let value = p.value[row * p.cols..(row + 1) * p.cols].to_vec();
        Ok(self.push(1, p.cols, value, Op::ParamRow(id, row), true))
    }

    /// Stop-gradient copy.
    pub fn detach(&mut self, v: Var) -> Var {
        let n = self.node(v);
        let (r, c, val) = (n.rows, n.cols, n.value.clone());
        self.push(r, c, val, Op::Const, false)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize)> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::Shape { op, lhs: sa, rhs: sb });
        }
        Ok(sa)
    }

    fn zip(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, mk: Op) -> Result<Var> {
        let (r, c) = self.same_shape(op, a, b)?;
        let val = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| f(x, y)).collect();
        let t = self.tracked(a) || self.tracked(b);
        Ok(self.push(r, c, val, mk, t))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// `a` (n×m) plus row vector `b` (1×m) broadcast over rows.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((r, c), sb) = (self.shape(a), self.shape(b));
        if sb != (1, c) {
            return Err(Error::Shape { op: "add_row", lhs: (r, c), rhs: sb });
        }
        let bv = self.value(b);
        let val = self.value(a).chunks(c.max(1)).flat_map(|row| row.iter().zip(bv).map(|(x, y)| x + y)).collect::<Vec<_>>();
        let val = if c == 0 { Vec::new() } else { val };
        let t = self.tracked(a) || self.tracked(b);
        Ok(self.push(r, c, val, Op::AddRow(a, b), t))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((n, k), (k2, m)) = (self.shape(a), self.shape(b));
        if k != k2 {
            return Err(Error::Shape { op: "matmul", lhs: (n, k), rhs: (k2, m) });
        }
        let mut out = vec![0.0; n * m];
        matmul_acc(self.value(a), self.value(b), &mut out, n, k, m);
        let t = self.tracked(a) || self.tracked(b);
        Ok(self.push(n, m, out, Op::MatMul(a, b), t))
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((n, k), (m, k2)) = (self.shape(a), self.shape(b));
        if k != k2 {
            return Err(Error::Shape { op: "matmul_t", lhs: (n, k), rhs: (m, k2) });
        }
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let ar = &av[i * k..(i + 1) * k];
            for j in 0..m {
                out[i * m + j] = dot(ar, &bv[j * k..(j + 1) * k]);
            }
        }
        let t = self.tracked(a) || self.tracked(b);
        Ok(self.push(n, m, out, Op::MatMulT(a, b), t))
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map_or(1, |&p| self.shape(p).0);
        let mut cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.0 != rows {
                return Err(Error::Shape { op: "concat", lhs: (rows, cols), rhs: s });
            }
            cols += s.1;
        }
        let mut val = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let c = self.shape(p).1;
                val.extend_from_slice(&self.value(p)[r * c..(r + 1) * c]);
            }
        }
        let t = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(rows, cols, val, Op::Concat(parts.to_vec()), t))
    }

    /// Row-wise stacking of matrices with equal column counts.
    pub fn stack(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts.first().map_or(0, |&p| self.shape(p).1);
        let mut rows = 0;
        let mut val = Vec::new();
        for &p in parts {
            let s = self.shape(p);
            if s.1 != cols {
                return Err(Error::Shape { op: "stack", lhs: (rows, cols), rhs: s });
            }
            rows += s.0;
            val.extend_from_slice(self.value(p));
        }
        let t = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(rows, cols, val, Op::Stack(parts.to_vec()), t))
    }

    /// Columns `start..start+len`.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if start + len > c {
            return Err(Error::Shape { op: "slice", lhs: (r, c), rhs: (start, len) });
        }
        let av = self.value(a);
        let val = (0..r).flat_map(|i| av[i * c + start..i * c + start + len].iter().copied()).collect();
        let t = self.tracked(a);
        Ok(self.push(r, len, val, Op::Slice(a, start), t))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        let t = self.tracked(a);
        self.push(1, 1, vec![s], Op::Sum(a), t)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s = v.iter().sum::<f64>() / v.len().max(1) as f64;
        let t = self.tracked(a);
        self.push(1, 1, vec![s], Op::Mean(a), t)
    }

    /// Column means: n×m → 1×m.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.shape(a);
        if r == 0 {
            return Err(Error::Shape { op: "mean_rows", lhs: (r, c), rhs: (1, c) });
        }
        let av = self.value(a);
        let mut out = vec![0.0; c];
        for row in av.chunks(c.max(1)) {
            out.iter_mut().zip(row).for_each(|(o, x)| *o += x);
        }
        out.iter_mut().for_each(|o| *o /= r as f64);
        let t = self.tracked(a);
        Ok(self.push(1, c, out, Op::MeanRows(a), t))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let (r, c) = self.shape(a);
        let val = self.value(a).iter().map(|&x| f(x)).collect();
        let t = self.tracked(a);
        self.push(r, c, val, op, t)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.map(a, f64::cos, Op::Cos(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| x * c, Op::Scale(a, c))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let mut val = self.value(a).to_vec();
        for row in val.chunks_mut(c.max(1)) {
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for x in row.iter_mut() {
                *x = (*x - mx).exp();
                z += *x;
            }
            row.iter_mut().for_each(|x| *x /= z);
        }
        let t = self.tracked(a);
        self.push(r, c, val, Op::Softmax(a), t)
    }

    /// Binary cross-entropy of a 1×1 logit against a 0/1 target, numerically stable.
    pub fn bce_logits(&mut self, logit: Var, target: f64) -> Result<Var> {
        let s = self.shape(logit);
        if s != (1, 1) {
            return Err(Error::Shape { op: "bce_logits", lhs: s, rhs: (1, 1) });
        }
        let x = self.scalar(logit);
        let loss = x.max(0.0) - x * target + (-x.abs()).exp().ln_1p();
        let t = self.tracked(logit);
        Ok(self.push(1, 1, vec![loss], Op::BceLogits(logit, target), t))
    }

    /// Backpropagate from a scalar; returns gradients for every parameter reached.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let s = self.shape(loss);
        if s != (1, 1) {
            return Err(Error::Shape { op: "backward", lhs: s, rhs: (1, 1) });
        }
        let n = loss.0 as usize + 1;
        let mut grads: Vec<Option<Vec<f64>>> = (0..n).map(|_| None).collect();
        grads[n - 1] = Some(vec![1.0]);
        let mut out = Gradients::default();
        for i in (0..n).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.tracked {
                continue;
            }
            self.propagate(node, &g, &mut grads, &mut out);
        }
        Ok(out)
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>], out: &mut Gradients) {
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            let nd = &self.nodes[v.0 as usize];
            if !nd.tracked {
                return;
            }
            let slot = grads[v.0 as usize].get_or_insert_with(|| vec![0.0; nd.value.len()]);
            f(slot);
        };
        match &node.op {
            Op::Const => {}
            Op::Param(id) => out.entries.push((*id, None, g.to_vec())),
            Op::ParamRow(id, r) => out.entries.push((*id, Some(*r), g.to_vec())),
            Op::Add(a, b) => {
                acc(*a, &mut |s| add_into(s, g));
                acc(*b, &mut |s| add_into(s, g));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |s| add_into(s, g));
                acc(*b, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x -= y));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                acc(*a, &mut |s| s.iter_mut().zip(g).zip(bv).for_each(|((x, y), z)| *x += y * z));
                acc(*b, &mut |s| s.iter_mut().zip(g).zip(av).for_each(|((x, y), z)| *x += y * z));
            }
            Op::AddRow(a, b) => {
                let c = node.cols;
                acc(*a, &mut |s| add_into(s, g));
                acc(*b, &mut |s| {
                    for row in g.chunks(c.max(1)) {
                        add_into(s, row);
                    }
                });
            }
            Op::MatMul(a, b) => {
                let ((n, k), m) = (self.shape(*a), node.cols);
                let (av, bv) = (self.value(*a), self.value(*b));
                // dA = G Bᵀ, dB = Aᵀ G
                acc(*a, &mut |s| {
                    for i in 0..n {
                        let gr = &g[i * m..(i + 1) * m];
                        for p in 0..k {
                            s[i * k + p] += dot(gr, &bv[p * m..(p + 1) * m]);
                        }
                    }
                });
                acc(*b, &mut |s| {
                    for i in 0..n {
                        let gr = &g[i * m..(i + 1) * m];
                        for p in 0..k {
                            let x = av[i * k + p];
                            if x != 0.0 {
                                s[p * m..(p + 1) * m].iter_mut().zip(gr).for_each(|(o, y)| *o += x * y);
                            }
                        }
                    }
                });
            }
            Op::MatMulT(a, b) => {
                let ((n, k), m) = (self.shape(*a), node.cols);
                let (av, bv) = (self.value(*a), self.value(*b));
                // C = A Bᵀ: dA = G B, dB = Gᵀ A
                acc(*a, &mut |s| matmul_acc(g, bv, s, n, m, k));
                acc(*b, &mut |s| {
                    for i in 0..n {
                        for j in 0..m {
                            let y = g[i * m + j];
                            if y != 0.0 {
                                s[j * k..(j + 1) * k].iter_mut().zip(&av[i * k..(i + 1) * k]).for_each(|(o, x)| *o += y * x);
                            }
                        }
                    }
                });
            }
            Op::Concat(parts) => {
                let (rows, cols) = (node.rows, node.cols);
                let mut off = 0;
                for &p in parts {
                    let c = self.shape(p).1;
                    acc(p, &mut |s| {
                        for r in 0..rows {
                            add_into(&mut s[r * c..(r + 1) * c], &g[r * cols + off..r * cols + off + c]);
                        }
                    });
                    off += c;
                }
            }
            Op::Stack(parts) => {
                let mut off = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    acc(p, &mut |s| add_into(s, &g[off..off + len]));
                    off += len;
                }
            }
            Op::Slice(a, start) => {
                let (c, w) = (self.shape(*a).1, node.cols);
                acc(*a, &mut |s| {
                    for r in 0..node.rows {
                        add_into(&mut s[r * c + start..r * c + start + w], &g[r * w..(r + 1) * w]);
                    }
                });
            }
            Op::Sum(a) => acc(*a, &mut |s| s.iter_mut().for_each(|x| *x += g[0])),
            Op::Mean(a) => {
                let n = self.value(*a).len().max(1) as f64;
                acc(*a, &mut |s| s.iter_mut().for_each(|x| *x += g[0] / n));
            }
            Op::MeanRows(a) => {
                let (r, c) = self.shape(*a);
                acc(*a, &mut |s| {
                    for row in s.chunks_mut(c.max(1)) {
                        row.iter_mut().zip(g).for_each(|(x, y)| *x += y / r as f64);
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                acc(*a, &mut |s| s.iter_mut().zip(g).zip(y).for_each(|((x, gg), yy)| *x += gg * yy * (1.0 - yy)));
            }
            Op::Tanh(a) => {
                let y = &node.value;
                acc(*a, &mut |s| s.iter_mut().zip(g).zip(y).for_each(|((x, gg), yy)| *x += gg * (1.0 - yy * yy)));
            }
            Op::Relu(a) => {
                let av = self.value(*a);
                acc(*a, &mut |s| s.iter_mut().zip(g).zip(av).for_each(|((x, gg), z)| *x += if *z > 0.0 { *gg } else { 0.0 }));
            }
            Op::Cos(a) => {
                let av = self.value(*a);
                acc(*a, &mut |s| s.iter_mut().zip(g).zip(av).for_each(|((x, gg), z)| *x -= gg * z.sin()));
            }
            Op::Scale(a, c) => acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, gg)| *x += gg * c)),
            Op::Softmax(a) => {
                let c = node.cols;
                let y = &node.value;
                acc(*a, &mut |s| {
                    for ((sr, gr), yr) in s.chunks_mut(c.max(1)).zip(g.chunks(c.max(1))).zip(y.chunks(c.max(1))) {
                        let d = dot(gr, yr);
                        sr.iter_mut().zip(gr).zip(yr).for_each(|((x, gg), yy)| *x += yy * (gg - d));
                    }
                });
            }
            Op::BceLogits(a, target) => {
                let x = self.scalar(*a);
                acc(*a, &mut |s| s[0] += g[0] * (sigmoid(x) - target));
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add_into(s: &mut [f64], g: &[f64]) {
    s.iter_mut().zip(g).for_each(|(x, y)| *x += y);
}

/// out (n×m) += a (n×k) · b (k×m)
fn matmul_acc(a: &[f64], b: &[f64], out: &mut [f64], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let x = a[i * k + p];
            if x != 0.0 {
                orow.iter_mut().zip(&b[p * m..(p + 1) * m]).for_each(|(o, y)| *o += x * y);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Init;

    fn store_with(vals: &[(&str, usize, usize, Vec<f64>)]) -> ParamStore {
        let mut s = ParamStore::new();
        for (name, r, c, v) in vals {
            s.register(name, *r, *c, Init::Values(v.clone()), &mut crate::harness::rng(0)).unwrap();
        }
        s
    }

    #[test]
    fn softmax_uniform() {
        let s = ParamStore::new();
        let mut t = Tape::new(&s);
        let x = t.row(vec![0.0; 3]);
        let y = t.softmax(x);
        for v in t.value(y) {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_matmul() {
        let s = ParamStore::new();
        let mut t = Tape::new(&s);
        let i3 = t.constant(3, 3, vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        let a = t.constant(3, 2, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let p = t.matmul(i3, a).unwrap();
        assert_eq!(t.value(p), t.value(a));
    }

    #[test]
    fn shape_errors_name_the_op() {
        let s = ParamStore::new();
        let mut t = Tape::new(&s);
        let a = t.zeros(2, 3);
        let b = t.zeros(2, 3);
        match t.matmul(a, b) {
            Err(Error::Shape { op: "matmul", lhs: (2, 3), rhs: (2, 3) }) => {}
            other => panic!("{other:?}"),
        }
        let c = t.zeros(1, 1);
        assert!(matches!(t.add(a, c), Err(Error::Shape { op: "add", .. })));
    }

    #[test]
    fn sigmoid_grad_at_zero() {
        let s = store_with(&[("x", 1, 4, vec![0.0; 4])]);
        let mut t = Tape::new(&s);
        let x = t.param(ParamId(0));
        let y = t.sigmoid(x);
        let l = t.sum(y);
        let g = t.backward(l).unwrap();
        assert_eq!(g.entries[0].2, vec![0.25; 4]);
    }

    #[test]
    fn sum_of_params_has_unit_grads() {
        let s = store_with(&[("a", 2, 2, vec![1.0, -2.0, 3.0, 0.5])]);
        let mut t = Tape::new(&s);
        let a = t.param(ParamId(0));
        let l = t.sum(a);
        let g = t.backward(l).unwrap();
        assert_eq!(g.entries[0].2, vec![1.0; 4]);
    }

    #[test]
    fn detached_values_get_no_gradient() {
        let s = store_with(&[("a", 1, 2, vec![1.0, 2.0])]);
        let mut t = Tape::new(&s);
        let a = t.param(ParamId(0));
        let d = t.detach(a);
        let l = t.sum(d);
        assert!(t.backward(l).unwrap().is_empty());
    }

    #[test]
    fn bce_at_zero_logit_is_ln2() {
        let s = ParamStore::new();
        let mut t = Tape::new(&s);
        let x = t.row(vec![0.0]);
        let l = t.bce_logits(x, 1.0).unwrap();
        assert!((t.scalar(l) - std::f64::consts::LN_2).abs() < 1e-15);
        let x = t.row(vec![-800.0]);
        let l = t.bce_logits(x, 1.0).unwrap();
        assert!((t.scalar(l) - 800.0).abs() < 1e-9);
    }
}
