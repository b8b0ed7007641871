//! Reverse-mode differentiation over a tape of tensor operations.
//!
//! A [`Graph`] borrows a [`ParamStore`] for the duration of one forward pass.
//! Nodes are appended in evaluation order, so walking the tape backwards is a
//! valid reverse topological order and every node is visited once.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::params::{Gradients, ParamId, ParamStore};
use crate::real::Real;
use crate::real::{Strided, StridedMut};
use crate::tensor::{axis_extents, numel, Tensor};

/// Gradient of every tracked node, indexed by [`Var::index`]; `None` where none arrived.
pub type NodeGradients<R> = Vec<Option<Vec<R>>>;

/// Probabilities are clamped to this floor before taking the log in cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    /// Position on the tape; indexes the per-node gradients of [`Graph::backward_all`].
    pub fn index(self) -> usize {
        self.0
    }
}

enum Value<R> {
    Owned(Tensor<R>),
    Param(ParamId),
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    Slice {
        input: Var,
        axis: usize,
        start: usize,
    },
    Reshape(Var),
    MaxOverAxis {
        input: Var,
        axis: usize,
        argmax: Vec<usize>,
    },
    MeanOverAxis {
        input: Var,
        axis: usize,
    },
    Sum(Var),
    Gather {
        table: Var,
        indices: Vec<usize>,
        padding: Option<usize>,
    },
    Conv1d {
        input: Var,
        kernels: Var,
        bias: Var,
    },
    Softmax {
        input: Var,
        axis: usize,
    },
    CrossEntropy {
        probs: Var,
        target: Var,
    },
}

struct Node<R> {
    value: Value<R>,
    op: Op,
    requires_grad: bool,
}

pub struct Graph<'p, R: Real> {
    params: &'p ParamStore<R>,
    nodes: Vec<Node<R>>,
    param_vars: Vec<Option<Var>>,
}

/// How an operand's elements map onto a broadcast output.
enum Broadcast {
    Same,
    /// Operand shape is a suffix of the output shape.
    Suffix(usize),
    Map(Vec<usize>),
}

impl Broadcast {
    fn new(input: &[usize], out: &[usize]) -> Self {
        if input == out {
            return Broadcast::Same;
        }
        if out.ends_with(input) {
            return Broadcast::Suffix(numel(input).max(1));
        }
        let offset = out.len() - input.len();
        let mut strides = vec![0usize; out.len()];
        let mut stride = 1;
        for d in (0..input.len()).rev() {
            if input[d] != 1 {
                strides[d + offset] = stride;
            }
            stride *= input[d];
        }
        let total = numel(out);
        let mut map = Vec::with_capacity(total);
        let mut idx = vec![0usize; out.len()];
        for _ in 0..total {
            map.push(idx.iter().zip(&strides).map(|(i, s)| i * s).sum());
            for d in (0..out.len()).rev() {
                idx[d] += 1;
                if idx[d] < out[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Broadcast::Map(map)
    }

    #[inline]
    fn at(&self, i: usize) -> usize {
        match self {
            Broadcast::Same => i,
            Broadcast::Suffix(n) => i % n,
            Broadcast::Map(m) => m[i],
        }
    }
}

fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

#[inline]
fn sigmoid<R: Real>(x: R) -> R {
    if x >= R::zero() {
        R::one() / (R::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (R::one() + e)
    }
}

impl<'p, R: Real> Graph<'p, R> {
    pub fn new(params: &'p ParamStore<R>) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<R> {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self.params.value(*id),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<R>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A value that never receives gradient.
    pub fn constant(&mut self, value: Tensor<R>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A tracked leaf that is not backed by the parameter store.
    pub fn variable(&mut self, value: Tensor<R>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// The parameter as a graph leaf; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: Value::Param(id),
            op: Op::Leaf,
            requires_grad: self.params.is_trainable(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    /// `a @ b` where `b` is `[k, n]` and `a` has trailing dimension `k`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() < 2 || sb.len() != 2 || sa[sa.len() - 1] != sb[0] {
            return Err(Error::shape("matmul", &[sa, sb]));
        }
        let (k, n) = (sb[0], sb[1]);
        let m = numel(sa) / k;
        let mut shape = sa[..sa.len() - 1].to_vec();
        shape.push(n);
        let mut out = vec![R::zero(); m * n];
        R::gemm_acc(
            m,
            k,
            n,
            Strided::new(self.value(a).data(), k, 1),
            Strided::new(self.value(b).data(), n, 1),
            StridedMut::new(&mut out, n, 1),
        );
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(Tensor::new(&shape, out)?, Op::MatMul(a, b), rg))
    }

    fn binary(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(R, R) -> R) -> Result<(Tensor<R>, bool)> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let shape = broadcast_shape(sa, sb).ok_or_else(|| Error::shape(name, &[sa, sb]))?;
        let (ia, ib) = (Broadcast::new(sa, &shape), Broadcast::new(sb, &shape));
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let out: Vec<R> = (0..numel(&shape)).map(|i| f(av[ia.at(i)], bv[ib.at(i)])).collect();
        Ok((Tensor::new(&shape, out)?, self.requires(a) || self.requires(b)))
    }

    /// Elementwise sum with numpy-style broadcasting.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, rg) = self.binary(a, b, "add", |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, rg) = self.binary(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b), rg))
    }

    /// Elementwise (Hadamard) product with broadcasting.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, rg) = self.binary(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let c = R::lit(factor);
        let t = self.value(a).map(|x| x * c);
        let rg = self.requires(a);
        self.push(t, Op::Scale(a, factor), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.value(a).map(sigmoid);
        let rg = self.requires(a);
        self.push(t, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|x| x.tanh());
        let rg = self.requires(a);
        self.push(t, Op::Tanh(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|x| if x > R::zero() { x } else { R::zero() });
        let rg = self.requires(a);
        self.push(t, Op::Relu(a), rg)
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or(Error::InvalidOperand {
                op: "concat",
                detail: "no inputs".into(),
            })?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::shape("concat", &[&base]));
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                let shapes: Vec<&[usize]> = inputs.iter().map(|&v| self.shape(v)).collect();
                return Err(Error::shape("concat", &shapes));
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, _, inner) = axis_extents(&base, axis);
        let mut out = Vec::with_capacity(numel(&shape));
        for o in 0..outer {
            for &v in inputs {
                let t = self.value(v);
                let chunk = t.shape()[axis] * inner;
                out.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let rg = inputs.iter().any(|&v| self.requires(v));
        Ok(self.push(
            Tensor::new(&shape, out)?,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// `len` entries of `axis` starting at `start`.
    pub fn slice(&mut self, input: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(input).to_vec();
        if axis >= s.len() || start + len > s[axis] {
            return Err(Error::InvalidOperand {
                op: "slice",
                detail: alloc::format!("range {}..{} on axis {} of shape {:?}", start, start + len, axis, s),
            });
        }
        let (outer, n, inner) = axis_extents(&s, axis);
        let data = self.value(input).data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * n + start) * inner;
            out.extend_from_slice(&data[base..base + len * inner]);
        }
        let mut shape = s;
        shape[axis] = len;
        let rg = self.requires(input);
        Ok(self.push(Tensor::new(&shape, out)?, Op::Slice { input, axis, start }, rg))
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(input).clone().reshaped(shape)?;
        let rg = self.requires(input);
        Ok(self.push(t, Op::Reshape(input), rg))
    }

    /// Maximum over `axis`, which is removed from the shape. Ties go to the first position.
    pub fn max_over_axis(&mut self, input: Var, axis: usize) -> Result<Var> {
        let s = self.shape(input).to_vec();
        if axis >= s.len() || s[axis] == 0 {
            return Err(Error::shape("max_over_axis", &[&s]));
        }
        let (outer, n, inner) = axis_extents(&s, axis);
        let data = self.value(input).data();
        let mut out = Vec::with_capacity(outer * inner);
        let mut argmax = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let mut best = 0;
                let mut best_v = data[o * n * inner + i];
                for k in 1..n {
                    let v = data[(o * n + k) * inner + i];
                    if v > best_v {
                        best = k;
                        best_v = v;
                    }
                }
                out.push(best_v);
                argmax.push(best);
            }
        }
        let mut shape = s;
        shape.remove(axis);
        let rg = self.requires(input);
        Ok(self.push(Tensor::new(&shape, out)?, Op::MaxOverAxis { input, axis, argmax }, rg))
    }

    pub fn mean_over_axis(&mut self, input: Var, axis: usize) -> Result<Var> {
        let s = self.shape(input).to_vec();
        if axis >= s.len() || s[axis] == 0 {
            return Err(Error::shape("mean_over_axis", &[&s]));
        }
        let (outer, n, inner) = axis_extents(&s, axis);
        let data = self.value(input).data();
        let scale = R::one() / R::lit(n as f64);
        let mut out = vec![R::zero(); outer * inner];
        for o in 0..outer {
            for k in 0..n {
                for i in 0..inner {
                    out[o * inner + i] += data[(o * n + k) * inner + i];
                }
            }
        }
        out.iter_mut().for_each(|x| *x *= scale);
        let mut shape = s;
        shape.remove(axis);
        let rg = self.requires(input);
        Ok(self.push(Tensor::new(&shape, out)?, Op::MeanOverAxis { input, axis }, rg))
    }

    /// Sum of every element, as a scalar.
    pub fn sum(&mut self, input: Var) -> Var {
        let total: R = self.value(input).data().iter().copied().sum();
        let rg = self.requires(input);
        self.push(Tensor::scalar(total), Op::Sum(input), rg)
    }

    /// Rows of `table` (`[rows, dim]`) selected by `indices`, shaped `index_shape + [dim]`.
    /// The `padding` row never receives gradient.
    pub fn embedding_gather(
        &mut self,
        table: Var,
        indices: &[usize],
        index_shape: &[usize],
        padding: Option<usize>,
    ) -> Result<Var> {
        let ts = self.shape(table).to_vec();
        if ts.len() != 2 || numel(index_shape) != indices.len() {
            return Err(Error::shape("embedding_gather", &[&ts, index_shape]));
        }
        let (rows, dim) = (ts[0], ts[1]);
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::IndexOutOfRange { index: bad, rows });
        }
        let data = self.value(table).data();
        let mut out = Vec::with_capacity(indices.len() * dim);
        for &i in indices {
            out.extend_from_slice(&data[i * dim..(i + 1) * dim]);
        }
        let mut shape = index_shape.to_vec();
        shape.push(dim);
        let rg = self.requires(table);
        Ok(self.push(
            Tensor::new(&shape, out)?,
            Op::Gather {
                table,
                indices: indices.to_vec(),
                padding,
            },
            rg,
        ))
    }

    /// Valid (unpadded) cross-correlation along the sequence axis.
    /// `input` is `[batch, len, in]`, `kernels` `[width, in, out]`, `bias` `[out]`;
    /// the result is `[batch, len - width + 1, out]`.
    pub fn conv1d(&mut self, input: Var, kernels: Var, bias: Var) -> Result<Var> {
        let (si, sk, sb) = (self.shape(input), self.shape(kernels), self.shape(bias));
        if si.len() != 3 || sk.len() != 3 || sb.len() != 1 || si[2] != sk[1] || sk[2] != sb[0] || si[1] < sk[0] {
            return Err(Error::shape("conv1d", &[si, sk, sb]));
        }
        let (batch, len, cin) = (si[0], si[1], si[2]);
        let (width, cout) = (sk[0], sk[2]);
        let out_len = len - width + 1;
        let mut out = Vec::with_capacity(batch * out_len * cout);
        {
            let (x, w, b) = (self.value(input).data(), self.value(kernels).data(), self.value(bias).data());
            for _ in 0..batch * out_len {
                out.extend_from_slice(b);
            }
            // overlapping windows: row t of the left operand starts at x[t * cin]
            for bi in 0..batch {
                R::gemm_acc(
                    out_len,
                    width * cin,
                    cout,
                    Strided::new(&x[bi * len * cin..(bi + 1) * len * cin], cin, 1),
                    Strided::new(w, cout, 1),
                    StridedMut::new(&mut out[bi * out_len * cout..(bi + 1) * out_len * cout], cout, 1),
                );
            }
        }
        let rg = self.requires(input) || self.requires(kernels) || self.requires(bias);
        Ok(self.push(
            Tensor::new(&[batch, out_len, cout], out)?,
            Op::Conv1d { input, kernels, bias },
            rg,
        ))
    }

    /// Softmax along `axis`, stabilised by subtracting the maximum.
    pub fn softmax(&mut self, input: Var, axis: usize) -> Result<Var> {
        let s = self.shape(input).to_vec();
        if axis >= s.len() {
            return Err(Error::shape("softmax", &[&s]));
        }
        let (outer, n, inner) = axis_extents(&s, axis);
        let mut out = self.value(input).data().to_vec();
        for o in 0..outer {
            for i in 0..inner {
                let at = |k: usize| (o * n + k) * inner + i;
                let mut max = out[at(0)];
                for k in 1..n {
                    max = max.max(out[at(k)]);
                }
                let mut total = R::zero();
                for k in 0..n {
                    let e = (out[at(k)] - max).exp();
                    out[at(k)] = e;
                    total += e;
                }
                for k in 0..n {
                    out[at(k)] /= total;
                }
            }
        }
        let rg = self.requires(input);
        Ok(self.push(Tensor::new(&s, out)?, Op::Softmax { input, axis }, rg))
    }

    /// Mean over rows of `-sum(target * ln(max(probs, 1e-12)))`; both operands `[batch, classes]`.
    pub fn cross_entropy(&mut self, probs: Var, target: Var) -> Result<Var> {
        let (sp, st) = (self.shape(probs), self.shape(target));
        if sp.len() != 2 || sp != st || sp[0] == 0 {
            return Err(Error::shape("cross_entropy", &[sp, st]));
        }
        let batch = sp[0];
        let floor = R::lit(PROB_FLOOR);
        let (p, t) = (self.value(probs).data(), self.value(target).data());
        let mut total = R::zero();
        for (&pi, &ti) in p.iter().zip(t) {
            if ti != R::zero() {
                total -= ti * pi.max(floor).ln();
            }
        }
        let loss = total / R::lit(batch as f64);
        let rg = self.requires(probs);
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { probs, target }, rg))
    }

    /// Runs the tape backwards from a scalar `loss` and returns parameter gradients.
    pub fn backward(self, loss: Var) -> Result<Gradients<R>> {
        Ok(self.backward_all(loss)?.0)
    }

    /// Like [`Graph::backward`], also returning the gradient of every tracked node
    /// (`None` where no gradient reached it).
    pub fn backward_all(self, loss: Var) -> Result<(Gradients<R>, NodeGradients<R>)> {
        let ls = self.shape(loss);
        if numel(ls) != 1 {
            return Err(Error::NonScalarLoss(ls.to_vec()));
        }
        let mut grads: Vec<Option<Vec<R>>> = vec![None; self.nodes.len()];
        let mut param_grads: Vec<Option<Vec<R>>> = vec![None; self.params.len()];
        grads[loss.0] = Some(vec![R::one()]);

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            if let Value::Param(id) = self.nodes[idx].value {
                let slot = param_grads[id.0].get_or_insert_with(|| vec![R::zero(); g.len()]);
                for (s, &x) in slot.iter_mut().zip(&g) {
                    *s += x;
                }
            }
            grads[idx] = Some(g);
        }
        Ok((Gradients { grads: param_grads }, grads))
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Vec<R>>], v: Var) -> Option<&'g mut Vec<R>> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        let n = self.value(v).len();
        Some(grads[v.0].get_or_insert_with(|| vec![R::zero(); n]))
    }

    fn broadcast_back(&self, grads: &mut [Option<Vec<R>>], v: Var, out_shape: &[usize], g: &[R], f: impl Fn(usize) -> R) {
        let map = Broadcast::new(self.shape(v), out_shape);
        if let Some(dst) = self.slot(grads, v) {
            for (i, &gi) in g.iter().enumerate() {
                dst[map.at(i)] += gi * f(i);
            }
        }
    }

    fn propagate(&self, idx: usize, g: &[R], grads: &mut [Option<Vec<R>>]) {
        let out = match &self.nodes[idx].value {
            Value::Owned(t) => t,
            Value::Param(_) => return,
        };
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (k, n) = (bv.shape()[0], bv.shape()[1]);
                let m = av.len() / k;
                if let Some(da) = self.slot(grads, *a) {
                    R::gemm_acc(m, n, k, Strided::new(g, n, 1), Strided::new(bv.data(), 1, n), StridedMut::new(da, k, 1));
                }
                if let Some(db) = self.slot(grads, *b) {
                    R::gemm_acc(k, m, n, Strided::new(av.data(), 1, k), Strided::new(g, n, 1), StridedMut::new(db, n, 1));
                }
            }
            Op::Add(a, b) => {
                self.broadcast_back(grads, *a, out.shape(), g, |_| R::one());
                self.broadcast_back(grads, *b, out.shape(), g, |_| R::one());
            }
            Op::Sub(a, b) => {
                self.broadcast_back(grads, *a, out.shape(), g, |_| R::one());
                self.broadcast_back(grads, *b, out.shape(), g, |_| -R::one());
            }
            Op::Mul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (ia, ib) = (Broadcast::new(sa, out.shape()), Broadcast::new(sb, out.shape()));
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                self.broadcast_back(grads, *a, out.shape(), g, |i| bv[ib.at(i)]);
                self.broadcast_back(grads, *b, out.shape(), g, |i| av[ia.at(i)]);
            }
            Op::Scale(a, c) => {
                let c = R::lit(*c);
                if let Some(da) = self.slot(grads, *a) {
                    for (d, &gi) in da.iter_mut().zip(g) {
                        *d += gi * c;
                    }
                }
            }
            Op::Sigmoid(a) => {
                if let Some(da) = self.slot(grads, *a) {
                    for ((d, &gi), &y) in da.iter_mut().zip(g).zip(out.data()) {
                        *d += gi * y * (R::one() - y);
                    }
                }
            }
            Op::Tanh(a) => {
                if let Some(da) = self.slot(grads, *a) {
                    for ((d, &gi), &y) in da.iter_mut().zip(g).zip(out.data()) {
                        *d += gi * (R::one() - y * y);
                    }
                }
            }
            Op::Relu(a) => {
                if let Some(da) = self.slot(grads, *a) {
                    for ((d, &gi), &y) in da.iter_mut().zip(g).zip(out.data()) {
                        if y > R::zero() {
                            *d += gi;
                        }
                    }
                }
            }
            Op::Concat { inputs, axis } => {
                let (outer, _, inner) = axis_extents(out.shape(), *axis);
                let mut offset = 0;
                let total = out.shape()[*axis] * inner;
                for &v in inputs {
                    let chunk = self.shape(v)[*axis] * inner;
                    if let Some(dv) = self.slot(grads, v) {
                        for o in 0..outer {
                            let src = &g[o * total + offset..o * total + offset + chunk];
                            for (d, &x) in dv[o * chunk..(o + 1) * chunk].iter_mut().zip(src) {
                                *d += x;
                            }
                        }
                    }
                    offset += chunk;
                }
            }
            Op::Slice { input, axis, start } => {
                let (outer, n, inner) = axis_extents(self.shape(*input), *axis);
                let len = out.shape()[*axis];
                if let Some(di) = self.slot(grads, *input) {
                    for o in 0..outer {
                        let base = (o * n + start) * inner;
                        let src = &g[o * len * inner..(o + 1) * len * inner];
                        for (d, &x) in di[base..base + len * inner].iter_mut().zip(src) {
                            *d += x;
                        }
                    }
                }
            }
            Op::Reshape(a) => {
                if let Some(da) = self.slot(grads, *a) {
                    for (d, &x) in da.iter_mut().zip(g) {
                        *d += x;
                    }
                }
            }
            Op::MaxOverAxis { input, axis, argmax } => {
                let (_, n, inner) = axis_extents(self.shape(*input), *axis);
                if let Some(di) = self.slot(grads, *input) {
                    for (j, (&gi, &k)) in g.iter().zip(argmax).enumerate() {
                        let (o, i) = (j / inner, j % inner);
                        di[(o * n + k) * inner + i] += gi;
                    }
                }
            }
            Op::MeanOverAxis { input, axis } => {
                let (outer, n, inner) = axis_extents(self.shape(*input), *axis);
                let scale = R::one() / R::lit(n as f64);
                if let Some(di) = self.slot(grads, *input) {
                    for o in 0..outer {
                        for k in 0..n {
                            for i in 0..inner {
                                di[(o * n + k) * inner + i] += g[o * inner + i] * scale;
                            }
                        }
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(da) = self.slot(grads, *a) {
                    da.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Gather { table, indices, padding } => {
                let dim = self.shape(*table)[1];
                if let Some(dt) = self.slot(grads, *table) {
                    for (j, &row) in indices.iter().enumerate() {
                        if Some(row) == *padding {
                            continue;
                        }
                        let src = &g[j * dim..(j + 1) * dim];
                        for (d, &x) in dt[row * dim..(row + 1) * dim].iter_mut().zip(src) {
                            *d += x;
                        }
                    }
                }
            }
            Op::Conv1d { input, kernels, bias } => {
                let (xi, wk) = (self.value(*input), self.value(*kernels));
                let (batch, len, cin) = (xi.shape()[0], xi.shape()[1], xi.shape()[2]);
                let (width, cout) = (wk.shape()[0], wk.shape()[2]);
                let out_len = len - width + 1;
                let span = width * cin;
                if let Some(dx) = self.slot(grads, *input) {
                    // one kernel offset at a time so written rows never overlap
                    for bi in 0..batch {
                        let gb = &g[bi * out_len * cout..(bi + 1) * out_len * cout];
                        for j in 0..width {
                            let wj = &wk.data()[j * cin * cout..(j + 1) * cin * cout];
                            let start = (bi * len + j) * cin;
                            R::gemm_acc(
                                out_len,
                                cout,
                                cin,
                                Strided::new(gb, cout, 1),
                                Strided::new(wj, 1, cout),
                                StridedMut::new(&mut dx[start..start + out_len * cin], cin, 1),
                            );
                        }
                    }
                }
                if let Some(dw) = self.slot(grads, *kernels) {
                    for bi in 0..batch {
                        let gb = &g[bi * out_len * cout..(bi + 1) * out_len * cout];
                        let xb = &xi.data()[bi * len * cin..(bi + 1) * len * cin];
                        R::gemm_acc(span, out_len, cout, Strided::new(xb, 1, cin), Strided::new(gb, cout, 1), StridedMut::new(dw, cout, 1));
                    }
                }
                if let Some(db) = self.slot(grads, *bias) {
                    for chunk in g.chunks(cout) {
                        for (d, &x) in db.iter_mut().zip(chunk) {
                            *d += x;
                        }
                    }
                }
            }
            Op::Softmax { input, axis } => {
                let (outer, n, inner) = axis_extents(out.shape(), *axis);
                let y = out.data();
                if let Some(di) = self.slot(grads, *input) {
                    for o in 0..outer {
                        for i in 0..inner {
                            let at = |k: usize| (o * n + k) * inner + i;
                            let dot: R = (0..n).map(|k| g[at(k)] * y[at(k)]).sum();
                            for k in 0..n {
                                di[at(k)] += y[at(k)] * (g[at(k)] - dot);
                            }
                        }
                    }
                }
            }
            Op::CrossEntropy { probs, target } => {
                let batch = self.shape(*probs)[0];
                let floor = R::lit(PROB_FLOOR);
                let scale = g[0] / R::lit(batch as f64);
                let (p, t) = (self.value(*probs).data(), self.value(*target).data());
                if let Some(dp) = self.slot(grads, *probs) {
                    for ((d, &pi), &ti) in dp.iter_mut().zip(p).zip(t) {
                        if ti != R::zero() && pi > floor {
                            *d -= scale * ti / pi;
                        }
                    }
                }
            }
        }
    }
}
