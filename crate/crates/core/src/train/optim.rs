//! Loss, AdamW and gradient clipping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::weights::{decays, layer_of, ModelWeights};
use crate::numerics::{Real, Tensor};

/// Mean squared error over all elements and its gradient `2 (p - t) / n`.
pub fn mse_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!("prediction {:?} vs target {:?}", pred.shape(), target.shape())));
    }
    let n = pred.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (p, t) in pred.data().iter().zip(target.data()) {
        let d = p.f64() - t.f64();
        loss += d * d;
        grad.push(T::of(2.0 * d / n));
    }
    Ok((loss / n, Tensor::new(pred.shape(), grad)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments per parameter plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub step: u64,
    pub params: AdamParams,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(weights: &ModelWeights<T>, params: AdamParams) -> Self {
        let zeros = || weights.tensors().iter().map(|t| vec![T::zero(); t.len()]).collect();
        OptimizerState {
            m: zeros(),
            v: zeros(),
            step: 0,
            params,
        }
    }
}

fn check_grads<T: Real>(weights: &ModelWeights<T>, grads: &[Vec<T>]) -> Result<()> {
    if grads.len() != weights.len() {
        return Err(Error::Shape(format!("{} gradients for {} tensors", grads.len(), weights.len())));
    }
    let layers = weights
        .names()
        .iter()
        .filter_map(|n| n.strip_prefix("layers.")?.split('.').next()?.parse::<usize>().ok())
        .max()
        .map_or(0, |l| l + 1);
    for ((name, t), g) in weights.names().iter().zip(weights.tensors()).zip(grads) {
        if g.len() != t.len() {
            return Err(Error::Shape(format!("gradient for {name} has {} values, tensor {}", g.len(), t.len())));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(layer_of(name, layers), format!("non-finite gradient for {name}")));
        }
    }
    Ok(())
}

/// Scales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Real>(grads: &mut [Vec<T>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|v| v.f64() * v.f64())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = T::of(max_norm / norm);
        grads.iter_mut().flat_map(|g| g.iter_mut()).for_each(|v| *v *= s);
    }
    norm
}

/// One AdamW update with decoupled weight decay.
///
/// Decay `w -= lr * weight_decay * w` is applied to matrices only; biases
/// and layer-norm parameters are skipped. Non-finite gradients abort the
/// step before any weight or moment changes.
pub fn adamw_step<T: Real>(
    weights: &mut ModelWeights<T>,
    grads: &[Vec<T>],
    state: &mut OptimizerState<T>,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    check_grads(weights, grads)?;
    state.step += 1;
    let AdamParams { beta1, beta2, eps } = state.params;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let names: Vec<bool> = weights.names().iter().map(|n| decays(n)).collect();
    for (i, tensor) in weights.tensors_mut().iter_mut().enumerate() {
        let decay = if names[i] { lr * weight_decay } else { 0.0 };
        let (m, v, g) = (&mut state.m[i], &mut state.v[i], &grads[i]);
        for (j, w) in tensor.data_mut().iter_mut().enumerate() {
            let gj = g[j].f64();
            let mj = beta1 * m[j].f64() + (1.0 - beta1) * gj;
            let vj = beta2 * v[j].f64() + (1.0 - beta2) * gj * gj;
            m[j] = T::of(mj);
            v[j] = T::of(vj);
            let mut wj = w.f64();
            wj -= decay * wj;
            wj -= lr * (mj / c1) / ((vj / c2).sqrt() + eps);
            *w = T::of(wj);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn mse_examples() {
        let p = Tensor::<f64>::new(&[2], vec![1.0, 2.0]).unwrap();
        let t = Tensor::<f64>::zeros(&[2]);
        let (l, g) = mse_loss(&p, &t).unwrap();
        assert_eq!(l, 2.5);
        assert_eq!(g.data(), &[1.0, 2.0]);
        assert_eq!(mse_loss(&p, &p).unwrap().0, 0.0);
        let ones = Tensor::<f64>::full(&[2, 3, 63], 1.0);
        assert_eq!(mse_loss(&ones, &Tensor::zeros(&[2, 3, 63])).unwrap().0, 1.0);
        assert!(matches!(mse_loss(&p, &Tensor::zeros(&[3])), Err(Error::Shape(_))));
    }

    fn tiny() -> ModelWeights<f64> {
        let cfg = ModelConfig {
            d_model: 4,
            layers: 1,
            heads: 1,
            ff_dim: 8,
            ..ModelConfig::desk(82)
        };
        ModelWeights::init(&cfg).unwrap()
    }

    fn zero_grads(w: &ModelWeights<f64>) -> Vec<Vec<f64>> {
        w.tensors().iter().map(|t| vec![0.0; t.len()]).collect()
    }

    #[test]
    fn zero_gradient_updates() {
        let mut w = tiny();
        let orig = w.clone();
        let g = zero_grads(&w);
        let mut st = OptimizerState::new(&w, AdamParams::default());
        adamw_step(&mut w, &g, &mut st, 5e-4, 0.0).unwrap();
        assert_eq!(w, orig);

        adamw_step(&mut w, &g, &mut st, 5e-4, 0.001).unwrap();
        for ((name, a), b) in w.names().iter().zip(w.tensors()).zip(orig.tensors()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                let expect = if decays(name) { y * (1.0 - 5e-7) } else { *y };
                assert!((x - expect).abs() <= 1e-15 * y.abs(), "{name}");
            }
        }
    }

    #[test]
    fn non_finite_gradient_aborts_untouched() {
        let mut w = tiny();
        let orig = w.clone();
        let mut g = zero_grads(&w);
        let last = g.len() - 1;
        g[last][0] = f64::NAN;
        let mut st = OptimizerState::new(&w, AdamParams::default());
        let err = adamw_step(&mut w, &g, &mut st, 1e-3, 0.0).unwrap_err();
        assert!(matches!(err, Error::Numeric { layer: 2, .. }), "{err}");
        assert_eq!(w, orig);
        assert_eq!(st.step, 0);
    }

    /// Scalar AdamW without decay, written out directly.
    struct ScalarAdam {
        m: f64,
        v: f64,
        t: i32,
    }

    impl ScalarAdam {
        fn step(&mut self, w: f64, g: f64, lr: f64) -> f64 {
            self.t += 1;
            self.m = 0.9 * self.m + 0.1 * g;
            self.v = 0.999 * self.v + 0.001 * g * g;
            let mh = self.m / (1.0 - 0.9f64.powi(self.t));
            let vh = self.v / (1.0 - 0.999f64.powi(self.t));
            w - lr * mh / (vh.sqrt() + 1e-8)
        }
    }

    #[test]
    fn first_step_on_quadratic_bowl() {
        // f(w) = sum(w^2)/2, gradient = w. Bias-corrected first step moves
        // every weight by lr * g / (|g| + eps).
        let mut w = tiny();
        let orig = w.clone();
        let g: Vec<Vec<f64>> = w.tensors().iter().map(|t| t.data().to_vec()).collect();
        let mut st = OptimizerState::new(&w, AdamParams::default());
        adamw_step(&mut w, &g, &mut st, 0.01, 0.0).unwrap();
        for (a, b) in w.tensors().iter().zip(orig.tensors()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                let expect = y - 0.01 * y / (y.abs() + 1e-8);
                assert!((x - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scalar_quadratic_converges() {
        let mut w = tiny();
        for t in w.tensors_mut() {
            t.data_mut().fill(1.0);
        }
        let mut st = OptimizerState::new(&w, AdamParams::default());
        let mut oracle = ScalarAdam { m: 0.0, v: 0.0, t: 0 };
        let mut s = 1.0;
        for _ in 0..1000 {
            let g: Vec<Vec<f64>> = w.tensors().iter().map(|t| t.data().iter().map(|v| 2.0 * v).collect()).collect();
            adamw_step(&mut w, &g, &mut st, 0.01, 0.0).unwrap();
            s = oracle.step(s, 2.0 * s, 0.01);
        }
        assert!(s.abs() < 0.01);
        let v = w.tensors()[0].data()[0];
        assert!((v - s).abs() < 1e-12, "{v} vs {s}");
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut g = vec![vec![3.0f64], vec![4.0]];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((g[0][0] - 0.6).abs() < 1e-15 && (g[1][0] - 0.8).abs() < 1e-15);
        let mut small = vec![vec![0.1f64]];
        clip_grad_norm(&mut small, 1.0);
        assert_eq!(small[0][0], 0.1);
    }
}
