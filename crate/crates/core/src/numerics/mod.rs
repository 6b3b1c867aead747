//! Dense tensors, a reverse-mode tape, a counter-based RNG and a
//! finite-difference gradient checker.

pub mod gradcheck;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use gradcheck::{check_gradients, GradCheckOptions, GradCheckReport};
pub use rng::RngStream;
pub use tape::{Gradients, Tape, Var};
pub use tensor::{layer_norm, matmul, softmax, Precision, Real, Tensor};

use crate::error::{Error, Result};

/// Inverted dropout on a plain tensor; identity when not training.
pub fn dropout<T: Real>(x: &Tensor<T>, rate: f64, rng: &mut RngStream, training: bool) -> Result<Tensor<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!("dropout rate {rate} not in [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let keep = T::of(1.0 / (1.0 - rate));
    let data = x
        .data()
        .iter()
        .map(|v| if rng.next_f64() < rate { T::zero() } else { *v * keep })
        .collect();
    Tensor::new(x.shape(), data)
}
