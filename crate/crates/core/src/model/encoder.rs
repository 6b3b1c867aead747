//! Pre-norm transformer encoder over one window of feature frames, plus
//! batched inference and per-batch gradients.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::model::weights::{ModelWeights, PER_LAYER};
use crate::numerics::{Real, RngStream, Tape, Tensor, Var};

/// `PE[t, 2i] = sin(t / 10000^(2i/d))`, `PE[t, 2i+1] = cos(t / 10000^(2i/d))`.
pub fn positional_encoding<T: Real>(length: usize, d_model: usize) -> Result<Tensor<T>> {
    if length == 0 || d_model == 0 {
        return Err(Error::Parameter("positional encoding needs positive length and width".into()));
    }
    let mut data = Vec::with_capacity(length * d_model);
    for t in 0..length {
        for c in 0..d_model {
            let i2 = (c - c % 2) as f64;
            let angle = t as f64 / 10000f64.powf(i2 / d_model as f64);
            data.push(T::of(if c % 2 == 0 { angle.sin() } else { angle.cos() }));
        }
    }
    Tensor::new(&[length, d_model], data)
}

/// Index of `layers.{layer}` tensor `offset` within the canonical list.
#[inline]
fn lp(params: &[Var], layer: usize, offset: usize) -> Var {
    params[2 + layer * PER_LAYER + offset]
}

fn check_finite<T: Real>(tape: &Tape<'_, T>, v: Var, layer: usize, what: &str) -> Result<()> {
    if tape.value(v).is_finite() {
        Ok(())
    } else {
        Err(Error::numeric(layer, format!("non-finite activations after {what}")))
    }
}

fn maybe_dropout<T: Real>(tape: &mut Tape<'_, T>, v: Var, rate: f64, rng: &mut Option<&mut RngStream>) -> Result<Var> {
    match rng.as_deref_mut() {
        Some(r) if rate > 0.0 => tape.dropout(v, rate, r),
        _ => Ok(v),
    }
}

/// Records the encoder graph for one window `x: [w, input_width]`.
///
/// `params` are the tape handles of every weight in canonical order and
/// `pe` the `[w, d_model]` positional encoding. Dropout is applied only when
/// `rng` is given. Attention probability matrices are pushed to `trace`
/// (layer-major, then head) when requested.
///
/// Numeric errors report layer 0 for the input projection, `i + 1` for
/// encoder layer `i` and `layers + 1` for the output head.
pub fn encode<'a, T: Real>(
    tape: &mut Tape<'a, T>,
    params: &[Var],
    cfg: &ModelConfig,
    x: Var,
    pe: Var,
    mut rng: Option<&mut RngStream>,
    mut trace: Option<&mut Vec<Var>>,
) -> Result<Var> {
    let (d, heads, dh) = (cfg.d_model, cfg.heads, cfg.head_dim());
    let eps = cfg.layer_norm_eps;
    let rate = cfg.dropout;
    let scale = T::of(1.0 / (dh as f64).sqrt());

    let h = tape.matmul(x, params[0])?;
    let h = tape.add_row(h, params[1])?;
    let h = tape.add(h, pe)?;
    let mut h = maybe_dropout(tape, h, rate, &mut rng)?;
    check_finite(tape, h, 0, "input projection")?;

    for l in 0..cfg.layers {
        let a = tape.layer_norm(h, lp(params, l, 0), lp(params, l, 1), eps)?;
        let mut proj = [a; 3];
        for (m, slot) in proj.iter_mut().enumerate() {
            let y = tape.matmul(a, lp(params, l, 2 + 2 * m))?;
            *slot = tape.add_row(y, lp(params, l, 3 + 2 * m))?;
        }
        let [q, k, v] = proj;
        let mut outs = Vec::with_capacity(heads);
        for hd in 0..heads {
            let qh = tape.slice_cols(q, hd * dh, dh)?;
            let kh = tape.slice_cols(k, hd * dh, dh)?;
            let vh = tape.slice_cols(v, hd * dh, dh)?;
            let s = tape.matmul_t(qh, kh, true)?;
            let s = tape.scale(s, scale);
            let p = tape.softmax(s);
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(p);
            }
            let p = maybe_dropout(tape, p, rate, &mut rng)?;
            outs.push(tape.matmul(p, vh)?);
        }
        let cat = if heads == 1 { outs[0] } else { tape.concat_cols(&outs)? };
        let o = tape.matmul(cat, lp(params, l, 8))?;
        let o = tape.add_row(o, lp(params, l, 9))?;
        let o = maybe_dropout(tape, o, rate, &mut rng)?;
        h = tape.add(h, o)?;

        let f = tape.layer_norm(h, lp(params, l, 10), lp(params, l, 11), eps)?;
        let f = tape.matmul(f, lp(params, l, 12))?;
        let f = tape.add_row(f, lp(params, l, 13))?;
        let f = tape.gelu(f);
        let f = maybe_dropout(tape, f, rate, &mut rng)?;
        let f = tape.matmul(f, lp(params, l, 14))?;
        let f = tape.add_row(f, lp(params, l, 15))?;
        let f = maybe_dropout(tape, f, rate, &mut rng)?;
        h = tape.add(h, f)?;
        check_finite(tape, h, l + 1, "encoder layer")?;
    }

    let base = 2 + cfg.layers * PER_LAYER;
    let h = tape.layer_norm(h, params[base], params[base + 1], eps)?;
    let y = tape.matmul(h, params[base + 2])?;
    let y = tape.add_row(y, params[base + 3])?;
    check_finite(tape, y, cfg.layers + 1, "output head")?;
    debug_assert_eq!(tape.value(y).shape(), &[tape.value(x).shape()[0], cfg.output_width]);
    let _ = d;
    Ok(y)
}

fn check_batch<T: Real>(cfg: &ModelConfig, batch: &Tensor<T>) -> Result<(usize, usize)> {
    let s = batch.shape();
    if s.len() != 3 || s[2] != cfg.input_width || s[1] == 0 {
        return Err(Error::Shape(format!(
            "batch shape {s:?} does not match [b, w, {}]",
            cfg.input_width
        )));
    }
    Ok((s[0], s[1]))
}

fn item<T: Real>(batch: &Tensor<T>, i: usize) -> Tensor<T> {
    let (w, c) = (batch.shape()[1], batch.shape()[2]);
    Tensor::new(&[w, c], batch.data()[i * w * c..(i + 1) * w * c].to_vec()).expect("item shape")
}

/// One window through the encoder without recording gradients.
pub fn forward_item<T: Real>(
    weights: &ModelWeights<T>,
    cfg: &ModelConfig,
    x: &Tensor<T>,
    pe: &Tensor<T>,
    rng: Option<&mut RngStream>,
    trace: Option<&mut Vec<Tensor<T>>>,
) -> Result<Tensor<T>> {
    let mut tape = Tape::new();
    let params: Vec<Var> = weights.tensors().iter().map(|t| tape.constant_ref(t)).collect();
    let xv = tape.constant_ref(x);
    let pv = tape.constant_ref(pe);
    let mut vars = Vec::new();
    let want = trace.is_some();
    let y = encode(&mut tape, &params, cfg, xv, pv, rng, want.then_some(&mut vars))?;
    if let Some(out) = trace {
        out.extend(vars.iter().map(|v| tape.value(*v).clone()));
    }
    Ok(tape.value(y).clone())
}

/// Batched forward `[b, w, input_width] -> [b, w, output_width]`.
///
/// With `training`, dropout for item `i` draws from `rng.fork(i)`, so the
/// result does not depend on evaluation order.
pub fn forward<T: Real>(
    weights: &ModelWeights<T>,
    cfg: &ModelConfig,
    batch: &Tensor<T>,
    training: bool,
    rng: &RngStream,
) -> Result<Tensor<T>> {
    let (b, w) = check_batch(cfg, batch)?;
    let pe = positional_encoding::<T>(w, cfg.d_model)?;
    let outs: Vec<Tensor<T>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let x = item(batch, i);
            let mut r = rng.fork(i as u64);
            forward_item(weights, cfg, &x, &pe, training.then_some(&mut r), None)
        })
        .collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(b * w * cfg.output_width);
    for o in outs {
        data.extend_from_slice(o.data());
    }
    Tensor::new(&[b, w, cfg.output_width], data)
}

/// Attention probabilities of one window, `layers × heads` matrices `[w, w]`.
pub fn attention_maps<T: Real>(weights: &ModelWeights<T>, cfg: &ModelConfig, x: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
    let pe = positional_encoding::<T>(x.shape()[0], cfg.d_model)?;
    let mut maps = Vec::new();
    forward_item(weights, cfg, x, &pe, None, Some(&mut maps))?;
    Ok(maps)
}

/// Mean-squared-error loss over a batch and its gradient with respect to
/// every weight, averaged over items.
#[derive(Debug, Clone)]
pub struct BatchGradient<T> {
    pub loss: f64,
    pub grads: Vec<Vec<T>>,
}

/// Per-item tapes run in parallel; their gradients are summed in item
/// order, so the result is independent of the thread count.
pub fn batch_gradient<T: Real>(
    weights: &ModelWeights<T>,
    cfg: &ModelConfig,
    inputs: &Tensor<T>,
    targets: &Tensor<T>,
    rng: Option<&RngStream>,
) -> Result<BatchGradient<T>> {
    let (b, w) = check_batch(cfg, inputs)?;
    if targets.shape() != [b, w, cfg.output_width] {
        return Err(Error::Shape(format!(
            "targets {:?} do not match [{b}, {w}, {}]",
            targets.shape(),
            cfg.output_width
        )));
    }
    let pe = positional_encoding::<T>(w, cfg.d_model)?;
    let mut total: Vec<Vec<T>> = weights.tensors().iter().map(|t| vec![T::zero(); t.len()]).collect();
    let mut loss = 0.0;
    let chunk = rayon::current_num_threads().max(1);
    for start in (0..b).step_by(chunk) {
        let end = (start + chunk).min(b);
        let parts: Vec<(f64, Vec<Option<Vec<T>>>)> = (start..end)
            .into_par_iter()
            .map(|i| {
                let x = item(inputs, i);
                let y = item(targets, i);
                let mut tape = Tape::new();
                let params: Vec<Var> = weights.tensors().iter().map(|t| tape.param(t)).collect();
                let xv = tape.constant_ref(&x);
                let pv = tape.constant_ref(&pe);
                let mut r = rng.map(|r| r.fork(i as u64));
                let pred = encode(&mut tape, &params, cfg, xv, pv, r.as_mut(), None)?;
                let l = tape.mse(pred, &y)?;
                let lv = tape.value(l).data()[0].f64();
                let mut g = tape.backward(l)?;
                Ok((lv, params.iter().map(|p| g.take(*p)).collect()))
            })
            .collect::<Result<_>>()?;
        for (lv, grads) in parts {
            loss += lv;
            for (acc, g) in total.iter_mut().zip(grads) {
                if let Some(g) = g {
                    acc.iter_mut().zip(&g).for_each(|(a, v)| *a += *v);
                }
            }
        }
    }
    let inv = T::of(1.0 / b as f64);
    for g in &mut total {
        g.iter_mut().for_each(|v| *v *= inv);
    }
    Ok(BatchGradient {
        loss: loss / b as f64,
        grads: total,
    })
}

/// Mean-squared error of the eval-mode forward pass.
pub fn batch_loss<T: Real>(weights: &ModelWeights<T>, cfg: &ModelConfig, inputs: &Tensor<T>, targets: &Tensor<T>) -> Result<f64> {
    let pred = forward(weights, cfg, inputs, false, &RngStream::new(0))?;
    if pred.shape() != targets.shape() {
        return Err(Error::Shape(format!("targets {:?} vs predictions {:?}", targets.shape(), pred.shape())));
    }
    let sum: f64 = pred
        .data()
        .iter()
        .zip(targets.data())
        .map(|(p, t)| (p.f64() - t.f64()).powi(2))
        .sum();
    Ok(sum / pred.len() as f64)
}
