//! Sliding-window inference over a whole feature series.

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::model::encoder::forward;
use crate::model::weights::ModelWeights;
use crate::numerics::{Real, RngStream, Tensor};
use crate::preprocess::sync::window_starts;
use crate::preprocess::TargetStats;
use crate::types::{SeriesMeta, TimeSeries};

/// Prediction windows advance by a quarter window.
pub fn predict_stride(window: usize) -> usize {
    (window / 4).max(1)
}
const PREDICT_BATCH: usize = 32;

/// Window starts at the prediction stride, plus one flush with the end so
/// the last frames are always covered.
pub fn covering_starts(n: usize, window: usize, stride: usize) -> Vec<usize> {
    let mut starts = window_starts(n, window, stride);
    if let Some(&last) = starts.last() {
        if last + window < n {
            starts.push(n - window);
        }
    }
    starts
}

/// Per-frame model outputs averaged over every covering window, in the
/// model's (normalized) target space.
pub fn predict_series<T: Real>(weights: &ModelWeights<T>, cfg: &ModelConfig, features: &TimeSeries) -> Result<TimeSeries> {
    let (n, w, cin, cout) = (features.len(), cfg.window, cfg.input_width, cfg.output_width);
    if features.width() != cin {
        return Err(Error::Shape(format!("features have width {}, model expects {cin}", features.width())));
    }
    if n < w {
        return Err(Error::Data(format!("series of {n} frames is shorter than the {w}-frame window")));
    }
    let starts = covering_starts(n, w, predict_stride(w));
    let mut sum = vec![0.0f64; n * cout];
    let mut count = vec![0u32; n];
    let rng = RngStream::new(0);
    for chunk in starts.chunks(PREDICT_BATCH) {
        let mut data = Vec::with_capacity(chunk.len() * w * cin);
        for &s in chunk {
            data.extend(features.values()[s * cin..(s + w) * cin].iter().map(|v| T::of(*v)));
        }
        let batch = Tensor::new(&[chunk.len(), w, cin], data)?;
        let out = forward(weights, cfg, &batch, false, &rng)?;
        for (b, &s) in chunk.iter().enumerate() {
            let block = &out.data()[b * w * cout..(b + 1) * w * cout];
            for (acc, v) in sum[s * cout..(s + w) * cout].iter_mut().zip(block) {
                *acc += v.f64();
            }
            count[s..s + w].iter_mut().for_each(|c| *c += 1);
        }
    }
    for (f, c) in count.iter().enumerate() {
        let c = *c as f64;
        sum[f * cout..(f + 1) * cout].iter_mut().for_each(|v| *v /= c);
    }
    TimeSeries::new(features.timestamps().to_vec(), cout, sum, SeriesMeta::default())
}

/// [`predict_series`] mapped back to millimetres.
pub fn predict_skeleton<T: Real>(
    weights: &ModelWeights<T>,
    cfg: &ModelConfig,
    features: &TimeSeries,
    targets: &TargetStats,
) -> Result<TimeSeries> {
    let mut out = predict_series(weights, cfg, features)?;
    if targets.width() != out.width() {
        return Err(Error::Shape(format!("target statistics width {} vs output {}", targets.width(), out.width())));
    }
    targets.invert(out.values_mut());
    Ok(out)
}
