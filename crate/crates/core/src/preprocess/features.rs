//! Channel statistics, min-max normalization followed by standardization,
//! finite-difference derivatives and feature assembly.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::TimeSeries;

/// Per-channel statistics fitted on training frames.
///
/// `mean` and `std` describe the min-max normalized values, not the raw
/// ones. Constant channels are flagged and get a unit range and unit std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub constant: Vec<bool>,
}

impl ChannelStats {
    pub fn width(&self) -> usize {
        self.min.len()
    }

    #[inline]
    fn range(&self, c: usize) -> f64 {
        if self.constant[c] {
            1.0
        } else {
            self.max[c] - self.min[c]
        }
    }

    #[inline]
    pub fn normalize_value(&self, c: usize, x: f64) -> f64 {
        (x - self.min[c]) / self.range(c)
    }

    #[inline]
    pub fn transform_value(&self, c: usize, x: f64) -> f64 {
        (self.normalize_value(c, x) - self.mean[c]) / self.std[c]
    }
}

/// Fits [`ChannelStats`] over every frame of `series`.
pub fn fit_stats(series: &TimeSeries) -> Result<ChannelStats> {
    fit_stats_on(series, std::slice::from_ref(&(0..series.len())))
}

/// Fits [`ChannelStats`] over the frames in `ranges`.
pub fn fit_stats_on(series: &TimeSeries, ranges: &[Range<usize>]) -> Result<ChannelStats> {
    let w = series.width();
    let rows: Vec<usize> = ranges.iter().flat_map(|r| r.clone()).collect();
    if rows.is_empty() {
        return Err(Error::Data("cannot fit statistics on zero frames".into()));
    }
    let mut stats = ChannelStats {
        min: vec![f64::INFINITY; w],
        max: vec![f64::NEG_INFINITY; w],
        mean: vec![0.0; w],
        std: vec![1.0; w],
        constant: vec![false; w],
    };
    for &i in &rows {
        for (c, &v) in series.frame(i).iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Data(format!("non-finite value at frame {i}, channel {c}")));
            }
            stats.min[c] = stats.min[c].min(v);
            stats.max[c] = stats.max[c].max(v);
        }
    }
    let n = rows.len() as f64;
    for c in 0..w {
        stats.constant[c] = stats.max[c] == stats.min[c];
        let norm: Vec<f64> = rows.iter().map(|&i| stats.normalize_value(c, series.frame(i)[c])).collect();
        let mean = norm.iter().sum::<f64>() / n;
        let var = norm.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        stats.mean[c] = mean;
        let sd = var.sqrt();
        if stats.constant[c] || !(sd > 0.0) {
            stats.constant[c] = true;
            stats.std[c] = 1.0;
        } else {
            stats.std[c] = sd;
        }
    }
    Ok(stats)
}

/// `((x - min)/(max - min) - mean)/std` per channel, without clipping.
pub fn normalize_standardize(series: &TimeSeries, stats: &ChannelStats) -> Result<TimeSeries> {
    if stats.width() != series.width() {
        return Err(Error::Parameter(format!(
            "statistics cover {} channels, series has {}",
            stats.width(),
            series.width()
        )));
    }
    let w = series.width();
    let values = series
        .values()
        .iter()
        .enumerate()
        .map(|(i, &x)| stats.transform_value(i % w, x))
        .collect();
    series.with_values(w, values)
}

/// Min-max normalization only; used to check the normalized range.
pub fn normalize(series: &TimeSeries, stats: &ChannelStats) -> Result<TimeSeries> {
    if stats.width() != series.width() {
        return Err(Error::Parameter("statistics width mismatch".into()));
    }
    let w = series.width();
    let values = series
        .values()
        .iter()
        .enumerate()
        .map(|(i, &x)| stats.normalize_value(i % w, x))
        .collect();
    series.with_values(w, values)
}

/// Central first and second differences on a uniform grid; first-order
/// one-sided differences at both ends.
pub fn derivatives(series: &TimeSeries, dt: f64) -> Result<(TimeSeries, TimeSeries)> {
    let n = series.len();
    if n < 3 {
        return Err(Error::Data(format!("derivatives need at least 3 frames, got {n}")));
    }
    let ts = series.timestamps();
    if let Some(i) = ts.windows(2).position(|p| ((p[1] - p[0]) - dt).abs() > 1e-9) {
        return Err(Error::Data(format!(
            "grid is not uniform at frame {}: step {} != {dt}",
            i + 1,
            ts[i + 1] - ts[i]
        )));
    }
    let w = series.width();
    let x = |i: usize, c: usize| series.frame(i)[c];
    let mut d1 = vec![0.0; n * w];
    let mut d2 = vec![0.0; n * w];
    let dt2 = dt * dt;
    for c in 0..w {
        d1[c] = (x(1, c) - x(0, c)) / dt;
        d2[c] = (x(2, c) - 2.0 * x(1, c) + x(0, c)) / dt2;
        for i in 1..n - 1 {
            d1[i * w + c] = (x(i + 1, c) - x(i - 1, c)) / (2.0 * dt);
            d2[i * w + c] = (x(i + 1, c) - 2.0 * x(i, c) + x(i - 1, c)) / dt2;
        }
        d1[(n - 1) * w + c] = (x(n - 1, c) - x(n - 2, c)) / dt;
        d2[(n - 1) * w + c] = (x(n - 1, c) - 2.0 * x(n - 2, c) + x(n - 3, c)) / dt2;
    }
    Ok((series.with_values(w, d1)?, series.with_values(w, d2)?))
}

/// Feature frames `[x]` or `[x, x', x'']`.
pub fn build_features(series: &TimeSeries, with_derivatives: bool, dt: f64) -> Result<TimeSeries> {
    if !with_derivatives {
        return Ok(series.clone());
    }
    let (d1, d2) = derivatives(series, dt)?;
    let w = series.width();
    let mut values = Vec::with_capacity(series.len() * 3 * w);
    for i in 0..series.len() {
        values.extend_from_slice(series.frame(i));
        values.extend_from_slice(d1.frame(i));
        values.extend_from_slice(d2.frame(i));
    }
    series.with_values(3 * w, values)
}

/// Per-coordinate z-scoring of skeleton targets for the regression loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub constant: Vec<bool>,
}

impl TargetStats {
    /// Mean 0, std 1: targets pass through unchanged.
    pub fn identity(width: usize) -> TargetStats {
        TargetStats {
            mean: vec![0.0; width],
            std: vec![1.0; width],
            constant: vec![false; width],
        }
    }

    pub fn fit(series: &TimeSeries, ranges: &[Range<usize>]) -> Result<TargetStats> {
        let w = series.width();
        let rows: Vec<usize> = ranges.iter().flat_map(|r| r.clone()).collect();
        if rows.is_empty() {
            return Err(Error::Data("cannot fit target statistics on zero frames".into()));
        }
        let n = rows.len() as f64;
        let mut out = TargetStats::identity(w);
        for c in 0..w {
            let mean = rows.iter().map(|&i| series.frame(i)[c]).sum::<f64>() / n;
            let var = rows
                .iter()
                .map(|&i| (series.frame(i)[c] - mean).powi(2))
                .sum::<f64>()
                / n;
            out.mean[c] = mean;
            let sd = var.sqrt();
            out.constant[c] = !(sd > 1e-9 * mean.abs().max(1.0));
            // Floor at one unit (1 mm) so near-static coordinates are not
            // amplified into noise.
            out.std[c] = sd.max(1.0);
        }
        Ok(out)
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, values: &mut [f64]) {
        let w = self.width();
        for (i, v) in values.iter_mut().enumerate() {
            *v = (*v - self.mean[i % w]) / self.std[i % w];
        }
    }

    pub fn invert(&self, values: &mut [f64]) {
        let w = self.width();
        for (i, v) in values.iter_mut().enumerate() {
            *v = *v * self.std[i % w] + self.mean[i % w];
        }
    }
}
