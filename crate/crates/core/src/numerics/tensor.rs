use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Storage precision. 64-bit is used for verification, 32-bit for training
/// throughput.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

/// Scalar types the tensor code is generic over: `f32` and `f64`.
pub trait Real:
    Float + Default + Debug + Send + Sync + Sum + AddAssign + SubAssign + MulAssign + DivAssign + 'static
{
    const PRECISION: Precision;
    fn of(v: f64) -> Self;
    fn f64(self) -> f64;
}

impl Real for f32 {
    const PRECISION: Precision = Precision::F32;
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    const PRECISION: Precision = Precision::F64;
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn f64(self) -> f64 {
        self
    }
}

pub const MAX_RANK: usize = 4;

/// Dense row-major tensor of up to four axes with an optional gradient
/// buffer of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
    pub grad: Option<Vec<T>>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if shape.is_empty() || shape.len() > MAX_RANK {
            return Err(Error::Shape(format!("rank {} not in 1..={MAX_RANK}", shape.len())));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor::new(shape, vec![T::zero(); n]).expect("valid shape")
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        let n = shape.iter().product();
        Tensor::new(shape, vec![value; n]).expect("valid shape")
    }

    pub fn from_f64(shape: &[usize], data: &[f64]) -> Result<Self> {
        Tensor::new(shape, data.iter().map(|v| T::of(*v)).collect())
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// `(rows, cols)` treating all leading axes as rows.
    pub fn as_matrix(&self) -> (usize, usize) {
        let cols = *self.shape.last().expect("rank >= 1");
        (self.data.len() / cols.max(1), cols)
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.is_empty() || shape.len() > MAX_RANK {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        self.grad = None;
        Ok(self)
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
            grad: None,
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.f64()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn zero_grad(&mut self) {
        self.grad = Some(vec![T::zero(); self.data.len()]);
    }

    /// Adds `g` into the gradient buffer, creating it if absent.
    pub fn accumulate_grad(&mut self, g: &[T]) -> Result<()> {
        if g.len() != self.data.len() {
            return Err(Error::Shape(format!(
                "gradient of length {} for tensor of {}",
                g.len(),
                self.data.len()
            )));
        }
        let buf = self.grad.get_or_insert_with(|| vec![T::zero(); g.len()]);
        for (b, v) in buf.iter_mut().zip(g) {
            *b += *v;
        }
        Ok(())
    }
}

/// `c += a · b` for row-major `a: m×k`, `b: k×n`, `c: m×n`.
pub fn gemm_nn<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert!(a.len() == m * k && b.len() == k * n && c.len() == m * n);
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        let arow = &a[i * k..(i + 1) * k];
        for (p, &av) in arow.iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// `c += a · bᵀ` for `a: m×k`, `b: n×k`, `c: m×n`.
pub fn gemm_nt<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert!(a.len() == m * k && b.len() == n * k && c.len() == m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            c[i * n + j] += dot(arow, &b[j * k..(j + 1) * k]);
        }
    }
}

/// `c += aᵀ · b` for `a: k×m`, `b: k×n`, `c: m×n`.
pub fn gemm_tn<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert!(a.len() == k * m && b.len() == k * n && c.len() == m * n);
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for (i, &av) in arow.iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            let crow = &mut c[i * n..(i + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// Dot product with eight independent accumulators (fixed summation order).
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let off = c * 8;
        for l in 0..8 {
            acc[l] += a[off + l] * b[off + l];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

pub fn transpose<T: Real>(rows: usize, cols: usize, a: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

/// Matrix product of two rank-2 tensors.
pub fn matmul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0] {
        return Err(Error::Shape(format!(
            "matmul of {:?} and {:?}",
            a.shape, b.shape
        )));
    }
    let (m, k, n) = (a.shape[0], a.shape[1], b.shape[1]);
    let mut out = Tensor::zeros(&[m, n]);
    gemm_nn(m, k, n, &a.data, &b.data, &mut out.data);
    Ok(out)
}

/// Max-subtracted softmax of each contiguous row of length `width`.
/// Rows that are entirely `-inf` produce zeros.
pub(crate) fn softmax_rows<T: Real>(data: &[T], width: usize, out: &mut [T]) {
    for (row, orow) in data.chunks_exact(width).zip(out.chunks_exact_mut(width)) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        if max == T::neg_infinity() {
            orow.iter_mut().for_each(|v| *v = T::zero());
            continue;
        }
        let mut sum = T::zero();
        for (o, &x) in orow.iter_mut().zip(row) {
            *o = (x - max).exp();
            sum += *o;
        }
        let inv = T::one() / sum;
        orow.iter_mut().for_each(|v| *v *= inv);
    }
}

/// Softmax along `axis`.
pub fn softmax<T: Real>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    if axis >= x.rank() {
        return Err(Error::Shape(format!("axis {axis} out of range for {:?}", x.shape)));
    }
    let len = x.shape[axis];
    let inner: usize = x.shape[axis + 1..].iter().product();
    let outer: usize = x.shape[..axis].iter().product();
    let mut out = Tensor::zeros(&x.shape);
    if inner == 1 {
        softmax_rows(&x.data, len, &mut out.data);
        return Ok(out);
    }
    let mut row = vec![T::zero(); len];
    let mut orow = vec![T::zero(); len];
    for o in 0..outer {
        for i in 0..inner {
            for (l, r) in row.iter_mut().enumerate() {
                *r = x.data[(o * len + l) * inner + i];
            }
            softmax_rows(&row, len, &mut orow);
            for (l, v) in orow.iter().enumerate() {
                out.data[(o * len + l) * inner + i] = *v;
            }
        }
    }
    Ok(out)
}

/// Per-row normalization statistics and normalized values, shared by the
/// tensor-level op and the tape.
pub(crate) fn layer_norm_rows<T: Real>(
    x: &[T],
    width: usize,
    gain: &[T],
    bias: &[T],
    eps: T,
    out: &mut [T],
    xhat: &mut [T],
    rstd: &mut [T],
) {
    let wn = T::of(width as f64);
    for (r, row) in x.chunks_exact(width).enumerate() {
        let mean = row.iter().copied().sum::<T>() / wn;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / wn;
        let rs = T::one() / (var + eps).sqrt();
        rstd[r] = rs;
        let base = r * width;
        for c in 0..width {
            let h = (row[c] - mean) * rs;
            xhat[base + c] = h;
            out[base + c] = gain[c] * h + bias[c];
        }
    }
}

/// Layer normalization over the last axis followed by an affine map.
pub fn layer_norm<T: Real>(x: &Tensor<T>, gain: &Tensor<T>, bias: &Tensor<T>, eps: f64) -> Result<Tensor<T>> {
    let (rows, width) = x.as_matrix();
    if gain.len() != width || bias.len() != width {
        return Err(Error::Shape(format!(
            "layer norm over width {width} with gain {:?} / bias {:?}",
            gain.shape, bias.shape
        )));
    }
    let mut out = Tensor::zeros(&x.shape);
    let mut xhat = vec![T::zero(); x.len()];
    let mut rstd = vec![T::zero(); rows];
    layer_norm_rows(&x.data, width, &gain.data, &bias.data, T::of(eps), &mut out.data, &mut xhat, &mut rstd);
    Ok(out)
}

/// Tanh-approximated GELU.
#[inline]
pub fn gelu<T: Real>(x: T) -> T {
    let c = T::of((2.0 / std::f64::consts::PI).sqrt());
    let inner = c * (x + T::of(0.044715) * x * x * x);
    T::of(0.5) * x * (T::one() + inner.tanh())
}

#[inline]
pub fn gelu_grad<T: Real>(x: T) -> T {
    let c = T::of((2.0 / std::f64::consts::PI).sqrt());
    let k = T::of(0.044715);
    let inner = c * (x + k * x * x * x);
    let t = inner.tanh();
    let dinner = c * (T::one() + T::of(3.0) * k * x * x);
    T::of(0.5) * (T::one() + t) + T::of(0.5) * x * (T::one() - t * t) * dinner
}
