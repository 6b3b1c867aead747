//! Reverse-mode differentiation over dense tensors.
//!
//! A [`Tape`] records every operation of a forward pass as a node holding
//! its output value and enough cached state to run the adjoint. Calling
//! [`Tape::backward`] walks the nodes in reverse and accumulates gradients
//! into every node that (transitively) depends on a parameter.
//!
//! Parameters can be borrowed rather than copied onto the tape, so a model's
//! weights are shared by all per-item tapes of a batch.
//!
//! Supported ops are exactly those the encoder needs: 2-D matmul (optionally
//! against a transposed right operand), elementwise add/mul/scale, bias-row
//! broadcast, row softmax, layer norm, GELU, dropout, column slicing and
//! concatenation, and the sum / MSE reductions.

use crate::error::{Error, Result};
use crate::numerics::rng::RngStream;
use crate::numerics::tensor::{
    gelu, gelu_grad, gemm_nn, gemm_nt, gemm_tn, layer_norm_rows, softmax_rows, Real, Tensor,
};

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Value<'a, T> {
    Borrowed(&'a Tensor<T>),
    Owned(Tensor<T>),
}

impl<T> Value<'_, T> {
    fn get(&self) -> &Tensor<T> {
        match self {
            Value::Borrowed(t) => t,
            Value::Owned(t) => t,
        }
    }
}

enum Op<T> {
    Leaf,
    MatMul { a: Var, b: Var, trans_b: bool },
    Add { a: Var, b: Var },
    AddRow { a: Var, row: Var },
    Mul { a: Var, b: Var },
    Scale { a: Var, factor: T },
    Softmax { a: Var },
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<T>, rstd: Vec<T> },
    Gelu { a: Var },
    Dropout { a: Var, mask: Vec<T> },
    SliceCols { a: Var, start: usize },
    ConcatCols { parts: Vec<Var> },
    Sum { a: Var },
    Mse { pred: Var, target: Vec<T> },
}

struct Node<'a, T> {
    value: Value<'a, T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

pub struct Tape<'a, T> {
    nodes: Vec<Node<'a, T>>,
}

impl<T: Real> Default for Tape<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a, T: Real> Tape<'a, T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Value<'a, T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A borrowed trainable leaf.
    pub fn param(&mut self, t: &'a Tensor<T>) -> Var {
        self.push(Value::Borrowed(t), Op::Leaf, true)
    }

    /// An owned trainable leaf.
    pub fn variable(&mut self, t: Tensor<T>) -> Var {
        self.push(Value::Owned(t), Op::Leaf, true)
    }

    /// An owned leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(Value::Owned(t), Op::Leaf, false)
    }

    pub fn constant_ref(&mut self, t: &'a Tensor<T>) -> Var {
        self.push(Value::Borrowed(t), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        self.nodes[v.0].value.get()
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn matrix_dims(&self, v: Var) -> Result<(usize, usize)> {
        let s = self.shape(v);
        if s.len() != 2 {
            return Err(Error::Shape(format!("expected a matrix, got shape {s:?}")));
        }
        Ok((s[0], s[1]))
    }

    /// `a · b`, or `a · bᵀ` when `trans_b`.
    pub fn matmul_t(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var> {
        let (m, k) = self.matrix_dims(a)?;
        let (br, bc) = self.matrix_dims(b)?;
        let (kb, n) = if trans_b { (bc, br) } else { (br, bc) };
        if k != kb {
            return Err(Error::Shape(format!(
                "matmul inner dimensions {k} and {kb} (trans_b = {trans_b})"
            )));
        }
        let mut out = Tensor::zeros(&[m, n]);
        {
            let (av, bv) = (self.value(a).data(), self.value(b).data());
            if trans_b {
                gemm_nt(m, k, n, av, bv, out.data_mut());
            } else {
                gemm_nn(m, k, n, av, bv, out.data_mut());
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Value::Owned(out), Op::MatMul { a, b, trans_b }, rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, b, false)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "add of {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| *x + *y)
            .collect();
        let out = Tensor::new(self.shape(a), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Value::Owned(out), Op::Add { a, b }, rg))
    }

    /// Adds a row vector to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (_, cols) = self.value(a).as_matrix();
        if self.value(row).len() != cols {
            return Err(Error::Shape(format!(
                "bias of {:?} against rows of width {cols}",
                self.shape(row)
            )));
        }
        let mut out = self.value(a).clone();
        out.grad = None;
        let r = self.value(row).data();
        for chunk in out.data_mut().chunks_exact_mut(cols) {
            for (v, b) in chunk.iter_mut().zip(r) {
                *v += *b;
            }
        }
        let rg = self.rg(a) || self.rg(row);
        Ok(self.push(Value::Owned(out), Op::AddRow { a, row }, rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "mul of {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| *x * *y)
            .collect();
        let out = Tensor::new(self.shape(a), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Value::Owned(out), Op::Mul { a, b }, rg))
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Var {
        let data = self.value(a).data().iter().map(|x| *x * factor).collect();
        let out = Tensor::new(self.shape(a), data).expect("same shape");
        let rg = self.rg(a);
        self.push(Value::Owned(out), Op::Scale { a, factor }, rg)
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        let (_, cols) = self.value(a).as_matrix();
        let mut out = Tensor::zeros(self.shape(a));
        softmax_rows(self.value(a).data(), cols, out.data_mut());
        let rg = self.rg(a);
        self.push(Value::Owned(out), Op::Softmax { a }, rg)
    }

    /// Layer norm over the last axis.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (rows, cols) = self.value(x).as_matrix();
        if self.value(gain).len() != cols || self.value(bias).len() != cols {
            return Err(Error::Shape(format!(
                "layer norm of width {cols} with gain {:?}, bias {:?}",
                self.shape(gain),
                self.shape(bias)
            )));
        }
        let mut out = Tensor::zeros(self.shape(x));
        let mut xhat = vec![T::zero(); rows * cols];
        let mut rstd = vec![T::zero(); rows];
        layer_norm_rows(
            self.value(x).data(),
            cols,
            self.value(gain).data(),
            self.value(bias).data(),
            T::of(eps),
            out.data_mut(),
            &mut xhat,
            &mut rstd,
        );
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        Ok(self.push(
            Value::Owned(out),
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            },
            rg,
        ))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let data = self.value(a).data().iter().map(|x| gelu(*x)).collect();
        let out = Tensor::new(self.shape(a), data).expect("same shape");
        let rg = self.rg(a);
        self.push(Value::Owned(out), Op::Gelu { a }, rg)
    }

    /// Inverted dropout. With `rate == 0` this is the identity and records
    /// nothing.
    pub fn dropout(&mut self, a: Var, rate: f64, rng: &mut RngStream) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Parameter(format!("dropout rate {rate} not in [0, 1)")));
        }
        if rate == 0.0 {
            return Ok(a);
        }
        let keep = T::of(1.0 / (1.0 - rate));
        let mask: Vec<T> = (0..self.value(a).len())
            .map(|_| if rng.next_f64() < rate { T::zero() } else { keep })
            .collect();
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(&mask)
            .map(|(x, m)| *x * *m)
            .collect();
        let out = Tensor::new(self.shape(a), data)?;
        let rg = self.rg(a);
        Ok(self.push(Value::Owned(out), Op::Dropout { a, mask }, rg))
    }

    /// Columns `start..start + len` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, cols) = self.matrix_dims(a)?;
        if start + len > cols {
            return Err(Error::Shape(format!(
                "column slice {start}..{} of width {cols}",
                start + len
            )));
        }
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&src[r * cols + start..r * cols + start + len]);
        }
        let out = Tensor::new(&[rows, len], data)?;
        let rg = self.rg(a);
        Ok(self.push(Value::Owned(out), Op::SliceCols { a, start }, rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Shape("concat of zero parts".into()))?;
        let rows = self.matrix_dims(first)?.0;
        let mut total = 0;
        for &p in parts {
            let (r, c) = self.matrix_dims(p)?;
            if r != rows {
                return Err(Error::Shape(format!("concat rows {r} != {rows}")));
            }
            total += c;
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                let c = self.shape(p)[1];
                data.extend_from_slice(&self.value(p).data()[r * c..(r + 1) * c]);
            }
        }
        let out = Tensor::new(&[rows, total], data)?;
        let rg = parts.iter().any(|p| self.rg(*p));
        Ok(self.push(
            Value::Owned(out),
            Op::ConcatCols {
                parts: parts.to_vec(),
            },
            rg,
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().copied().sum::<T>();
        let rg = self.rg(a);
        self.push(Value::Owned(Tensor::full(&[1], s)), Op::Sum { a }, rg)
    }

    /// Mean squared error against a fixed target.
    pub fn mse(&mut self, pred: Var, target: &Tensor<T>) -> Result<Var> {
        if self.shape(pred) != target.shape() {
            return Err(Error::Shape(format!(
                "mse of {:?} against target {:?}",
                self.shape(pred),
                target.shape()
            )));
        }
        let n = T::of(target.len() as f64);
        let loss = self
            .value(pred)
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (*p - *t) * (*p - *t))
            .sum::<T>()
            / n;
        let rg = self.rg(pred);
        Ok(self.push(
            Value::Owned(Tensor::full(&[1], loss)),
            Op::Mse {
                pred,
                target: target.data().to_vec(),
            },
            rg,
        ))
    }

    /// Reverse pass from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            return Err(Error::Shape(format!(
                "backward from non-scalar of shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(dy) = grads[idx].take() else { continue };
            self.backprop_node(idx, &dy, &mut grads);
            grads[idx] = Some(dy);
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, idx: usize, dy: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[idx];
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [T])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let len = self.value(v).len();
            let g = grads[v.0].get_or_insert_with(|| vec![T::zero(); len]);
            f(g);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b, trans_b } => {
                let (m, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                let n = node.value.get().shape()[1];
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if *trans_b {
                    // C = A Bᵀ, B: n×k
                    acc(*a, &mut |g| gemm_nn(m, n, k, dy, bv, g));
                    acc(*b, &mut |g| gemm_tn(n, m, k, dy, av, g));
                } else {
                    // C = A B, B: k×n
                    acc(*a, &mut |g| gemm_nt(m, n, k, dy, bv, g));
                    acc(*b, &mut |g| gemm_tn(k, m, n, av, dy, g));
                }
            }
            Op::Add { a, b } => {
                for v in [*a, *b] {
                    acc(v, &mut |g| g.iter_mut().zip(dy).for_each(|(g, d)| *g += *d));
                }
            }
            Op::AddRow { a, row } => {
                acc(*a, &mut |g| g.iter_mut().zip(dy).for_each(|(g, d)| *g += *d));
                let cols = self.value(*row).len();
                acc(*row, &mut |g| {
                    for chunk in dy.chunks_exact(cols) {
                        g.iter_mut().zip(chunk).for_each(|(g, d)| *g += *d);
                    }
                });
            }
            Op::Mul { a, b } => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |g| {
                    for i in 0..g.len() {
                        g[i] += dy[i] * bv[i];
                    }
                });
                acc(*b, &mut |g| {
                    for i in 0..g.len() {
                        g[i] += dy[i] * av[i];
                    }
                });
            }
            Op::Scale { a, factor } => {
                acc(*a, &mut |g| g.iter_mut().zip(dy).for_each(|(g, d)| *g += *d * *factor));
            }
            Op::Softmax { a } => {
                let y = node.value.get().data();
                let (_, cols) = node.value.get().as_matrix();
                acc(*a, &mut |g| {
                    for ((grow, yrow), drow) in g
                        .chunks_exact_mut(cols)
                        .zip(y.chunks_exact(cols))
                        .zip(dy.chunks_exact(cols))
                    {
                        let s: T = yrow.iter().zip(drow).map(|(y, d)| *y * *d).sum();
                        for c in 0..cols {
                            grow[c] += yrow[c] * (drow[c] - s);
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            } => {
                let cols = self.value(*gain).len();
                let gv = self.value(*gain).data();
                let wn = T::of(cols as f64);
                acc(*x, &mut |g| {
                    for r in 0..rstd.len() {
                        let base = r * cols;
                        let mut s1 = T::zero();
                        let mut s2 = T::zero();
                        for c in 0..cols {
                            let dh = dy[base + c] * gv[c];
                            s1 += dh;
                            s2 += dh * xhat[base + c];
                        }
                        let (m1, m2) = (s1 / wn, s2 / wn);
                        for c in 0..cols {
                            let dh = dy[base + c] * gv[c];
                            g[base + c] += rstd[r] * (dh - m1 - xhat[base + c] * m2);
                        }
                    }
                });
                acc(*gain, &mut |g| {
                    for (drow, hrow) in dy.chunks_exact(cols).zip(xhat.chunks_exact(cols)) {
                        for c in 0..cols {
                            g[c] += drow[c] * hrow[c];
                        }
                    }
                });
                acc(*bias, &mut |g| {
                    for drow in dy.chunks_exact(cols) {
                        g.iter_mut().zip(drow).for_each(|(g, d)| *g += *d);
                    }
                });
            }
            Op::Gelu { a } => {
                let av = self.value(*a).data();
                acc(*a, &mut |g| {
                    for i in 0..g.len() {
                        g[i] += dy[i] * gelu_grad(av[i]);
                    }
                });
            }
            Op::Dropout { a, mask } => {
                acc(*a, &mut |g| {
                    for i in 0..g.len() {
                        g[i] += dy[i] * mask[i];
                    }
                });
            }
            Op::SliceCols { a, start } => {
                let cols = self.shape(*a)[1];
                let len = node.value.get().shape()[1];
                acc(*a, &mut |g| {
                    for (r, drow) in dy.chunks_exact(len).enumerate() {
                        let dst = &mut g[r * cols + start..r * cols + start + len];
                        dst.iter_mut().zip(drow).for_each(|(g, d)| *g += *d);
                    }
                });
            }
            Op::ConcatCols { parts } => {
                let total = node.value.get().shape()[1];
                let mut offset = 0;
                for &p in parts {
                    let c = self.shape(p)[1];
                    acc(p, &mut |g| {
                        for (r, grow) in g.chunks_exact_mut(c).enumerate() {
                            let src = &dy[r * total + offset..r * total + offset + c];
                            grow.iter_mut().zip(src).for_each(|(g, d)| *g += *d);
                        }
                    });
                    offset += c;
                }
            }
            Op::Sum { a } => {
                acc(*a, &mut |g| g.iter_mut().for_each(|g| *g += dy[0]));
            }
            Op::Mse { pred, target } => {
                let pv = self.value(*pred).data();
                let scale = T::of(2.0) * dy[0] / T::of(target.len() as f64);
                acc(*pred, &mut |g| {
                    for i in 0..g.len() {
                        g[i] += scale * (pv[i] - target[i]);
                    }
                });
            }
        }
    }
}
