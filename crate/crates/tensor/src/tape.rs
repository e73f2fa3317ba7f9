//! Reverse-mode tape.
//!
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order and backward is a single reverse sweep.

use crate::params::{Gradients, ParamId, ParamStore};
use crate::{Result, Tensor, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Val {
    Owned(Vec<f64>),
    Param(ParamId),
}

enum Op {
    Constant,
    Leaf,
    Param(ParamId),
    Row(ParamId, usize),
    MatVec(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Concat(Vec<Var>),
    Sigmoid(Var),
    Tanh(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Dot(Var, Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    Log(Var),
    Sum(Var),
    Neg(Var),
    Slice(Var, usize),
}

struct Node {
    shape: Vec<usize>,
    val: Val,
    op: Op,
    needs_grad: bool,
}

/// Records one forward computation over a read-only [`ParamStore`].
pub struct Tape<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
    leaf_grads: Vec<Option<Vec<f64>>>,
    backward_done: bool,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn is_vector(shape: &[usize]) -> bool {
    shape.len() == 1
}

impl<'p> Tape<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Tape {
            store,
            nodes: Vec::new(),
            param_nodes: vec![None; store.len()],
            leaf_grads: Vec::new(),
            backward_done: false,
        }
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

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, needs_grad: bool) -> Var {
        debug_assert_eq!(numel(&shape), data.len());
        self.nodes.push(Node {
            shape,
            val: Val::Owned(data),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &[f64] {
        match &self.nodes[v.0].val {
            Val::Owned(d) => d,
            Val::Param(id) => self.store.value(*id).data(),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    /// Value of a one-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        Tensor::new(self.shape(v).to_vec(), self.value(v).to_vec()).expect("consistent node")
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.ng(v)
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, t: Tensor) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, t.into_data(), Op::Constant, false)
    }

    /// Differentiable input that is not a stored parameter. Its gradient is
    /// available through [`Tape::leaf_grad`] after backward.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, t.into_data(), Op::Leaf, true)
    }

    /// Whole parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.index()] {
            return v;
        }
        let shape = self.store.value(id).shape().to_vec();
        self.nodes.push(Node {
            shape,
            val: Val::Param(id),
            op: Op::Param(id),
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.index()] = Some(v);
        v
    }

    /// Embedding lookup: row `row` of a matrix parameter.
    pub fn row(&mut self, id: ParamId, row: usize) -> Result<Var> {
        let p = self.store.value(id);
        if p.shape().len() != 2 || row >= p.shape()[0] {
            return Err(TensorError::Shape {
                op: "row",
                shapes: vec![p.shape().to_vec(), vec![row]],
            });
        }
        let data = p.row(row).to_vec();
        Ok(self.push(vec![p.cols()], data, Op::Row(id, row), true))
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (ws, xs) = (self.shape(w), self.shape(x));
        if ws.len() != 2 || !is_vector(xs) || ws[1] != xs[0] {
            return Err(TensorError::shape("matvec", &[ws, xs]));
        }
        let (rows, cols) = (ws[0], ws[1]);
        let wv = self.value(w);
        let xv = self.value(x);
        let out: Vec<f64> = (0..rows)
            .map(|r| dot(&wv[r * cols..(r + 1) * cols], xv))
            .collect();
        let ng = self.ng(w) || self.ng(x);
        Ok(self.push(vec![rows], out, Op::MatVec(w, x), ng))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::shape(op, &[self.shape(a), self.shape(b)]));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Add(a, b), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Mul(a, b), ng))
    }

    /// Concatenate vectors (scalars count as length-one vectors).
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(TensorError::shape("concat", &[]));
        }
        let mut out = Vec::new();
        for &p in parts {
            if self.shape(p).len() > 1 {
                let shapes: Vec<&[usize]> = parts.iter().map(|&q| self.shape(q)).collect();
                return Err(TensorError::shape("concat", &shapes));
            }
            out.extend_from_slice(self.value(p));
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        let n = out.len();
        Ok(self.push(vec![n], out, Op::Concat(parts.to_vec()), ng))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.value(a).iter().map(|&x| f(x)).collect();
        let ng = self.ng(a);
        self.push(self.shape(a).to_vec(), out, op, ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, f64::ln, Op::Log(a))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, |x| -x, Op::Neg(a))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.unary(a, |x| x * s, Op::Scale(a, s))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        if !is_vector(self.shape(a)) {
            return Err(TensorError::shape("softmax", &[self.shape(a)]));
        }
        let out = softmax(self.value(a));
        let ng = self.ng(a);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Softmax(a), ng))
    }

    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        if !is_vector(self.shape(a)) {
            return Err(TensorError::shape("log_softmax", &[self.shape(a)]));
        }
        let out = log_softmax(self.value(a));
        let ng = self.ng(a);
        Ok(self.push(self.shape(a).to_vec(), out, Op::LogSoftmax(a), ng))
    }

    /// Inner product of two equal-length vectors.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        if !is_vector(self.shape(a)) {
            return Err(TensorError::shape("dot", &[self.shape(a), self.shape(b)]));
        }
        self.same_shape("dot", a, b)?;
        let out = dot(self.value(a), self.value(b));
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(vec![], vec![out], Op::Dot(a, b), ng))
    }

    /// `s * v` for a one-element node `s`.
    pub fn scale_by(&mut self, s: Var, v: Var) -> Result<Var> {
        if numel(self.shape(s)) != 1 {
            return Err(TensorError::shape("scale_by", &[self.shape(s), self.shape(v)]));
        }
        let k = self.scalar(s);
        let out = self.value(v).iter().map(|x| k * x).collect();
        let ng = self.ng(s) || self.ng(v);
        Ok(self.push(self.shape(v).to_vec(), out, Op::ScaleBy(s, v), ng))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().sum();
        let ng = self.ng(a);
        self.push(vec![], vec![out], Op::Sum(a), ng)
    }

    /// Sum of several one-element nodes.
    pub fn add_all(&mut self, xs: &[Var]) -> Result<Var> {
        match xs.len() {
            0 => Ok(self.constant(Tensor::scalar(0.0))),
            1 => Ok(xs[0]),
            _ => {
                let c = self.concat(xs)?;
                Ok(self.sum(c))
            }
        }
    }

    /// Contiguous sub-vector `a[start..start + len]`.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(a);
        if !is_vector(s) || len == 0 || start + len > s[0] {
            return Err(TensorError::Shape {
                op: "slice",
                shapes: vec![s.to_vec(), vec![start, len]],
            });
        }
        let out = self.value(a)[start..start + len].to_vec();
        let ng = self.ng(a);
        Ok(self.push(vec![len], out, Op::Slice(a, start), ng))
    }

    /// Element `i` of a vector as a scalar node.
    pub fn pick(&mut self, a: Var, i: usize) -> Result<Var> {
        let v = self.slice(a, i, 1)?;
        self.nodes[v.0].shape = vec![];
        Ok(v)
    }

    /// Gradient of a [`Tape::leaf`] node from the last backward pass.
    pub fn leaf_grad(&self, v: Var) -> Option<&[f64]> {
        self.leaf_grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Allow another backward pass over the same recording.
    pub fn reset_grads(&mut self) {
        self.backward_done = false;
        self.leaf_grads.clear();
    }

    /// Propagate `d loss / d node` back through the tape.
    ///
    /// Returns gradients for every parameter reached from `loss`; leaf
    /// gradients are kept on the tape. A second call without
    /// [`Tape::reset_grads`] is rejected.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if numel(self.shape(loss)) != 1 {
            return Err(TensorError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        if self.backward_done {
            return Err(TensorError::Contract(
                "backward already ran on this tape; reset_grads first".into(),
            ));
        }
        self.backward_done = true;

        let mut out = Gradients::new(self.store);
        let mut grads: Vec<Option<Vec<f64>>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![1.0]);
        let mut leaf_grads: Vec<Option<Vec<f64>>> = Vec::new();
        leaf_grads.resize_with(self.nodes.len(), || None);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Leaf => leaf_grads[i] = Some(g),
                Op::Param(id) => {
                    let buf = out.slot(*id, g.len());
                    buf.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                }
                Op::Row(id, r) => {
                    let p = self.store.value(*id);
                    let cols = p.cols();
                    let buf = out.slot(*id, p.len());
                    buf[r * cols..(r + 1) * cols]
                        .iter_mut()
                        .zip(&g)
                        .for_each(|(a, b)| *a += b);
                }
                Op::MatVec(w, x) => {
                    let (w, x) = (*w, *x);
                    let cols = self.shape(w)[1];
                    if self.ng(w) {
                        let xv = self.value(x);
                        let gw = acc(&mut grads, w, numel(self.shape(w)));
                        for (r, &gr) in g.iter().enumerate() {
                            if gr != 0.0 {
                                axpy(gr, xv, &mut gw[r * cols..(r + 1) * cols]);
                            }
                        }
                    }
                    if self.ng(x) {
                        let wv = self.value(w);
                        let gx = acc(&mut grads, x, cols);
                        for (r, &gr) in g.iter().enumerate() {
                            if gr != 0.0 {
                                axpy(gr, &wv[r * cols..(r + 1) * cols], gx);
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    for v in [*a, *b] {
                        if self.ng(v) {
                            add_into(acc(&mut grads, v, g.len()), &g);
                        }
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.ng(a) {
                        let bv = self.value(b);
                        let ga = acc(&mut grads, a, g.len());
                        for ((o, gi), bi) in ga.iter_mut().zip(&g).zip(bv) {
                            *o += gi * bi;
                        }
                    }
                    if self.ng(b) {
                        let av = self.value(a);
                        let gb = acc(&mut grads, b, g.len());
                        for ((o, gi), ai) in gb.iter_mut().zip(&g).zip(av) {
                            *o += gi * ai;
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = numel(self.shape(p));
                        if self.ng(p) {
                            add_into(acc(&mut grads, p, n), &g[off..off + n]);
                        }
                        off += n;
                    }
                }
                Op::Sigmoid(a) => {
                    let y = self.value(Var(i));
                    let ga = acc(&mut grads, *a, g.len());
                    for ((o, gi), yi) in ga.iter_mut().zip(&g).zip(y) {
                        *o += gi * yi * (1.0 - yi);
                    }
                }
                Op::Tanh(a) => {
                    let y = self.value(Var(i));
                    let ga = acc(&mut grads, *a, g.len());
                    for ((o, gi), yi) in ga.iter_mut().zip(&g).zip(y) {
                        *o += gi * (1.0 - yi * yi);
                    }
                }
                Op::Softmax(a) => {
                    let y = self.value(Var(i));
                    let inner = dot(&g, y);
                    let ga = acc(&mut grads, *a, g.len());
                    for ((o, gi), yi) in ga.iter_mut().zip(&g).zip(y) {
                        *o += yi * (gi - inner);
                    }
                }
                Op::LogSoftmax(a) => {
                    let y = self.value(Var(i));
                    let total: f64 = g.iter().sum();
                    let ga = acc(&mut grads, *a, g.len());
                    for ((o, gi), yi) in ga.iter_mut().zip(&g).zip(y) {
                        *o += gi - yi.exp() * total;
                    }
                }
                Op::Dot(a, b) => {
                    let (a, b, s) = (*a, *b, g[0]);
                    if self.ng(a) {
                        let bv = self.value(b);
                        axpy(s, bv, acc(&mut grads, a, bv.len()));
                    }
                    if self.ng(b) {
                        let av = self.value(a);
                        axpy(s, av, acc(&mut grads, b, av.len()));
                    }
                }
                Op::Scale(a, s) => {
                    axpy(*s, &g, acc(&mut grads, *a, g.len()));
                }
                Op::ScaleBy(s, v) => {
                    let (s, v) = (*s, *v);
                    if self.ng(s) {
                        let d = dot(&g, self.value(v));
                        acc(&mut grads, s, 1)[0] += d;
                    }
                    if self.ng(v) {
                        let k = self.scalar(s);
                        axpy(k, &g, acc(&mut grads, v, g.len()));
                    }
                }
                Op::Log(a) => {
                    let x = self.value(*a);
                    let ga = acc(&mut grads, *a, g.len());
                    for ((o, gi), xi) in ga.iter_mut().zip(&g).zip(x) {
                        *o += gi / xi;
                    }
                }
                Op::Sum(a) => {
                    let n = numel(self.shape(*a));
                    acc(&mut grads, *a, n).iter_mut().for_each(|o| *o += g[0]);
                }
                Op::Neg(a) => {
                    axpy(-1.0, &g, acc(&mut grads, *a, g.len()));
                }
                Op::Slice(a, start) => {
                    let n = numel(self.shape(*a));
                    add_into(&mut acc(&mut grads, *a, n)[*start..start + g.len()], &g);
                }
            }
        }
        self.leaf_grads = leaf_grads;
        Ok(out)
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], v: Var, n: usize) -> &mut Vec<f64> {
    grads[v.0].get_or_insert_with(|| vec![0.0; n])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler keep independent FMA chains
    let mut s = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        s[0] += a[i] * b[i];
        s[1] += a[i + 1] * b[i + 1];
        s[2] += a[i + 2] * b[i + 2];
        s[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn log_softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

pub(crate) fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}
