use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::numerics::{Real, RngStream, Tensor};

/// Tensors per encoder layer, in canonical order.
pub const PER_LAYER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Xavier,
    Zeros,
    Ones,
}

/// Name, shape and initializer of one learnable tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: InitKind,
}

impl ParamSpec {
    pub fn decays(&self) -> bool {
        decays(&self.name)
    }
}

/// Layer-norm parameters and biases are excluded from weight decay.
pub fn decays(name: &str) -> bool {
    !(name.ends_with(".bias") || name.contains("norm"))
}

/// Numeric-error layer index of a tensor: 0 for the input projection,
/// `i + 1` for encoder layer `i`, `layers + 1` for the final norm and head.
pub fn layer_of(name: &str, layers: usize) -> usize {
    if name.starts_with("input.") {
        return 0;
    }
    name.strip_prefix("layers.")
        .and_then(|r| r.split('.').next())
        .and_then(|i| i.parse::<usize>().ok())
        .map_or(layers + 1, |i| i + 1)
}

/// The full parameter list in canonical order:
///
/// ```text
/// input.weight [in, d]        input.bias [d]
/// layers.{i}.attn_norm.{gain,bias} [d]
/// layers.{i}.attn.{q,k,v,o}.weight [d, d]   .bias [d]
/// layers.{i}.ff_norm.{gain,bias} [d]
/// layers.{i}.ff.0.weight [d, ff]  ff.0.bias [ff]
/// layers.{i}.ff.1.weight [ff, d]  ff.1.bias [d]
/// final_norm.{gain,bias} [d]
/// output.weight [d, out]      output.bias [out]
/// ```
pub fn param_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let d = cfg.d_model;
    let spec = |name: String, shape: &[usize], init| ParamSpec {
        name,
        shape: shape.to_vec(),
        init,
    };
    let mut out = vec![
        spec("input.weight".into(), &[cfg.input_width, d], InitKind::Xavier),
        spec("input.bias".into(), &[d], InitKind::Zeros),
    ];
    for i in 0..cfg.layers {
        let p = format!("layers.{i}");
        out.push(spec(format!("{p}.attn_norm.gain"), &[d], InitKind::Ones));
        out.push(spec(format!("{p}.attn_norm.bias"), &[d], InitKind::Zeros));
        for m in ["q", "k", "v", "o"] {
            out.push(spec(format!("{p}.attn.{m}.weight"), &[d, d], InitKind::Xavier));
            out.push(spec(format!("{p}.attn.{m}.bias"), &[d], InitKind::Zeros));
        }
        out.push(spec(format!("{p}.ff_norm.gain"), &[d], InitKind::Ones));
        out.push(spec(format!("{p}.ff_norm.bias"), &[d], InitKind::Zeros));
        out.push(spec(format!("{p}.ff.0.weight"), &[d, cfg.ff_dim], InitKind::Xavier));
        out.push(spec(format!("{p}.ff.0.bias"), &[cfg.ff_dim], InitKind::Zeros));
        out.push(spec(format!("{p}.ff.1.weight"), &[cfg.ff_dim, d], InitKind::Xavier));
        out.push(spec(format!("{p}.ff.1.bias"), &[d], InitKind::Zeros));
    }
    out.push(spec("final_norm.gain".into(), &[d], InitKind::Ones));
    out.push(spec("final_norm.bias".into(), &[d], InitKind::Zeros));
    out.push(spec("output.weight".into(), &[d, cfg.output_width], InitKind::Xavier));
    out.push(spec("output.bias".into(), &[cfg.output_width], InitKind::Zeros));
    out
}

/// Xavier-uniform bound for a `[fan_in, fan_out]` matrix.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// All learnable tensors of one model, in [`param_specs`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Real> ModelWeights<T> {
    /// Deterministic initialization: tensor `i` draws from stream `i` of
    /// the config seed.
    pub fn init(cfg: &ModelConfig) -> Result<ModelWeights<T>> {
        cfg.validate()?;
        let root = RngStream::new(cfg.seed);
        let specs = param_specs(cfg);
        let mut names = Vec::with_capacity(specs.len());
        let mut tensors = Vec::with_capacity(specs.len());
        for (i, s) in specs.into_iter().enumerate() {
            let n: usize = s.shape.iter().product();
            let data: Vec<T> = match s.init {
                InitKind::Zeros => vec![T::zero(); n],
                InitKind::Ones => vec![T::one(); n],
                InitKind::Xavier => {
                    let b = xavier_bound(s.shape[0], s.shape[1]);
                    let mut rng = root.fork(i as u64);
                    (0..n).map(|_| T::of(rng.uniform(-b, b))).collect()
                }
            };
            tensors.push(Tensor::new(&s.shape, data)?);
            names.push(s.name);
        }
        Ok(ModelWeights { names, tensors })
    }

    /// Assembles weights from named tensors, checking every expected name is
    /// present exactly once with the configured shape.
    pub fn from_named(cfg: &ModelConfig, named: Vec<(String, Tensor<T>)>) -> Result<ModelWeights<T>> {
        let specs = param_specs(cfg);
        let mut map: HashMap<String, Tensor<T>> = HashMap::with_capacity(named.len());
        for (name, t) in named {
            if map.insert(name.clone(), t).is_some() {
                return Err(Error::checkpoint(name, "tensor appears more than once"));
            }
        }
        let mut names = Vec::with_capacity(specs.len());
        let mut tensors = Vec::with_capacity(specs.len());
        for s in specs {
            let t = map
                .remove(&s.name)
                .ok_or_else(|| Error::checkpoint(s.name.clone(), "tensor missing"))?;
            if t.shape() != s.shape.as_slice() {
                return Err(Error::checkpoint(
                    s.name.clone(),
                    format!("shape {:?} does not match config shape {:?}", t.shape(), s.shape),
                ));
            }
            if !t.is_finite() {
                return Err(Error::checkpoint(s.name.clone(), "non-finite values"));
            }
            names.push(s.name);
            tensors.push(t);
        }
        if let Some(extra) = map.keys().min() {
            return Err(Error::checkpoint(extra.clone(), "tensor not part of the configured model"));
        }
        Ok(ModelWeights { names, tensors })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.names.iter().position(|n| n == name).map(move |i| &mut self.tensors[i])
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Real>(&self) -> ModelWeights<U> {
        ModelWeights {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }
}
