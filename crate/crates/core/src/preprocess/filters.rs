//! Series-to-series signal operations: gap handling, smoothing, zero-phase
//! low-pass filtering and grid resampling.

use crate::error::{Error, Result};
use crate::types::{grid_index, grid_time, TimeSeries};

/// Replaces every NaN with 0.
pub fn zero_fill(series: &TimeSeries) -> TimeSeries {
    let mut out = series.clone();
    for v in out.values_mut() {
        if v.is_nan() {
            *v = 0.0;
        }
    }
    out
}

/// Linearly interpolates interior NaN runs of at most `max_gap` frames.
///
/// Leading and trailing frames with any NaN coordinate are trimmed. A run
/// longer than `max_gap` in any coordinate removes those frames and splits
/// the series there, so the result is a list of gap-free segments in time
/// order.
pub fn interpolate_gaps(series: &TimeSeries, max_gap: usize) -> Result<Vec<TimeSeries>> {
    let w = series.width();
    let n = series.len();
    for c in 0..w {
        if (0..n).all(|i| series.frame(i)[c].is_nan()) {
            return Err(Error::Data(format!("coordinate {c} is entirely missing")));
        }
    }
    let mut pending = vec![0..n];
    let mut done = Vec::new();
    while let Some(range) = pending.pop() {
        let Some(range) = trim_nan_edges(series, range) else { continue };
        match first_long_gap(series, range.clone(), max_gap) {
            Some(gap) => {
                // Later piece first so the stack pops segments in time order.
                pending.push(gap.end..range.end);
                pending.push(range.start..gap.start);
            }
            None => done.push(range),
        }
    }
    if done.is_empty() {
        return Err(Error::Data("no gap-free frames remain after trimming".into()));
    }
    Ok(done
        .into_iter()
        .map(|r| fill_short_gaps(&series.slice(r)))
        .collect())
}

fn trim_nan_edges(series: &TimeSeries, range: std::ops::Range<usize>) -> Option<std::ops::Range<usize>> {
    let complete = |i: usize| series.frame(i).iter().all(|v| !v.is_nan());
    let start = range.clone().find(|&i| complete(i))?;
    let end = range.rev().find(|&i| complete(i))? + 1;
    Some(start..end)
}

fn first_long_gap(series: &TimeSeries, range: std::ops::Range<usize>, max_gap: usize) -> Option<std::ops::Range<usize>> {
    let mut best: Option<std::ops::Range<usize>> = None;
    for c in 0..series.width() {
        let mut i = range.start;
        while i < range.end {
            if series.frame(i)[c].is_nan() {
                let s = i;
                while i < range.end && series.frame(i)[c].is_nan() {
                    i += 1;
                }
                if i - s > max_gap && best.as_ref().map_or(true, |b| s < b.start) {
                    best = Some(s..i);
                }
            } else {
                i += 1;
            }
        }
    }
    best
}

fn fill_short_gaps(series: &TimeSeries) -> TimeSeries {
    let mut out = series.clone();
    let t = series.timestamps().to_vec();
    for c in 0..series.width() {
        let col = series.column(c);
        let mut filled = col.clone();
        let mut i = 0;
        while i < col.len() {
            if col[i].is_nan() {
                let a = i - 1;
                let mut b = i;
                while col[b].is_nan() {
                    b += 1;
                }
                for (k, v) in filled.iter_mut().enumerate().take(b).skip(i) {
                    let f = (t[k] - t[a]) / (t[b] - t[a]);
                    *v = col[a] + (col[b] - col[a]) * f;
                }
                i = b;
            } else {
                i += 1;
            }
        }
        out.set_column(c, &filled);
    }
    out
}

/// Centered moving average with truncated windows at both ends.
pub fn moving_average(series: &TimeSeries, window: usize) -> Result<TimeSeries> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::Parameter(format!("moving-average window must be odd and positive, got {window}")));
    }
    if window > series.len() {
        return Err(Error::Parameter(format!(
            "moving-average window {window} exceeds series length {}",
            series.len()
        )));
    }
    if window == 1 {
        return Ok(series.clone());
    }
    let half = window / 2;
    let n = series.len();
    let mut out = series.clone();
    for c in 0..series.width() {
        let col = series.column(c);
        let smoothed: Vec<f64> = (0..n)
            .map(|i| {
                let lo = i.saturating_sub(half);
                let hi = (i + half + 1).min(n);
                col[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            })
            .collect();
        out.set_column(c, &smoothed);
    }
    Ok(out)
}

/// Second-order Butterworth low-pass section from the bilinear transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    /// Denominator `[1, a1, a2]`; only `a1, a2` are stored.
    pub a: [f64; 2],
}

impl Biquad {
    pub fn butterworth_lowpass(cutoff_hz: f64, sample_rate_hz: f64) -> Result<Biquad> {
        if !(cutoff_hz > 0.0) || !(sample_rate_hz > 0.0) || cutoff_hz >= sample_rate_hz / 2.0 {
            return Err(Error::Parameter(format!(
                "cutoff {cutoff_hz} Hz must lie in (0, {}) Hz",
                sample_rate_hz / 2.0
            )));
        }
        let k = (std::f64::consts::PI * cutoff_hz / sample_rate_hz).tan();
        let q = std::f64::consts::SQRT_2;
        let norm = 1.0 / (1.0 + q * k + k * k);
        let b0 = k * k * norm;
        Ok(Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - q * k + k * k) * norm],
        })
    }

    /// Direct form II transposed, starting from the steady state for `x[0]`.
    fn run(&self, x: &[f64]) -> Vec<f64> {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let x0 = x.first().copied().unwrap_or(0.0);
        let mut z1 = (1.0 - b0) * x0;
        let mut z2 = (b2 - a2) * x0;
        x.iter()
            .map(|&xi| {
                let y = b0 * xi + z1;
                z1 = b1 * xi - a1 * y + z2;
                z2 = b2 * xi - a2 * y;
                y
            })
            .collect()
    }

    /// Forward-backward filtering with odd-reflection padding.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = 9.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
        let mut y = self.run(&ext);
        y.reverse();
        let mut y = self.run(&y);
        y.reverse();
        y[pad..pad + n].to_vec()
    }
}

/// Zero-phase second-order Butterworth low-pass over every column.
pub fn lowpass(series: &TimeSeries, cutoff_hz: f64, sample_rate_hz: f64) -> Result<TimeSeries> {
    let filter = Biquad::butterworth_lowpass(cutoff_hz, sample_rate_hz)?;
    let mut out = series.clone();
    for c in 0..series.width() {
        out.set_column(c, &filter.filtfilt(&series.column(c)));
    }
    Ok(out)
}

/// Linear resampling onto the grid `k · period`, covering
/// `[ceil(t0/period)·period, t_last]` without extrapolation.
///
/// Grid points within `1e-9` periods of a source timestamp copy that source
/// frame exactly.
pub fn resample(series: &TimeSeries, period: f64) -> Result<TimeSeries> {
    if !(period > 0.0) {
        return Err(Error::Parameter(format!("period must be positive, got {period}")));
    }
    let ts = series.timestamps();
    if ts.len() < 2 || ts[ts.len() - 1] - ts[0] < period * (1.0 - 1e-9) {
        return Err(Error::Data("series is shorter than one resampling period".into()));
    }
    let (t0, t1) = (ts[0], ts[ts.len() - 1]);
    let k0 = (t0 / period - 1e-9).ceil() as i64;
    let k1 = (t1 / period + 1e-9).floor() as i64;
    let w = series.width();
    let mut times = Vec::with_capacity((k1 - k0 + 1).max(0) as usize);
    let mut values = Vec::with_capacity(times.capacity() * w);
    let mut j = 0;
    for k in k0..=k1 {
        let t = grid_time(k, period);
        while j + 1 < ts.len() && ts[j + 1] <= t {
            j += 1;
        }
        // `j` is the last source index with ts[j] <= t, or 0.
        let exact = [j, j + 1]
            .into_iter()
            .filter(|&i| i < ts.len())
            .find(|&i| grid_index(ts[i], period) == Some(k));
        if let Some(i) = exact {
            values.extend_from_slice(series.frame(i));
        } else {
            let hi = (j + 1).min(ts.len() - 1);
            let lo = hi - 1;
            let f = ((t - ts[lo]) / (ts[hi] - ts[lo])).clamp(0.0, 1.0);
            let (a, b) = (series.frame(lo), series.frame(hi));
            values.extend(a.iter().zip(b).map(|(x, y)| x + (y - x) * f));
        }
        times.push(t);
    }
    let mut meta = series.meta.clone();
    meta.sample_rate = Some(1.0 / period);
    TimeSeries::new(times, w, values, meta)
}

/// True when consecutive timestamps are `grid_time(k0 + i, period)`.
pub fn is_on_grid(series: &TimeSeries, period: f64) -> bool {
    let Some(t0) = series.first_time() else { return true };
    let Some(k0) = grid_index(t0, period) else { return false };
    series
        .timestamps()
        .iter()
        .enumerate()
        .all(|(i, &t)| t == grid_time(k0 + i as i64, period))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SeriesMeta;
    use proptest::prelude::*;

    fn series(times: Vec<f64>, cols: &[Vec<f64>]) -> TimeSeries {
        let n = times.len();
        let w = cols.len();
        let values = (0..n).flat_map(|i| cols.iter().map(move |c| c[i])).collect();
        TimeSeries::new(times, w, values, SeriesMeta::default()).unwrap()
    }

    fn uniform(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| grid_time(i as i64, dt)).collect()
    }

    #[test]
    fn zero_fill_examples() {
        let s = series(uniform(3, 0.01), &[vec![1.0, f64::NAN, 3.0], vec![f64::NAN; 3]]);
        let z = zero_fill(&s);
        assert_eq!(z.column(0), vec![1.0, 0.0, 3.0]);
        assert_eq!(z.column(1), vec![0.0; 3]);
        let clean = series(uniform(2, 0.01), &[vec![4.0, 5.0]]);
        assert_eq!(zero_fill(&clean), clean);
    }

    #[test]
    fn interpolation_midpoint_and_identity() {
        let s = series(uniform(3, 0.01), &[vec![0.0, f64::NAN, 2.0]]);
        let out = interpolate_gaps(&s, 30).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0].column(0)[1] - 1.0).abs() < 1e-12);
        let clean = series(uniform(4, 0.01), &[vec![1.0, 2.0, 3.0, 4.0]]);
        assert_eq!(interpolate_gaps(&clean, 30).unwrap(), vec![clean]);
    }

    #[test]
    fn long_gap_splits_series() {
        let mut col: Vec<f64> = (0..100).map(|i| i as f64).collect();
        for v in &mut col[40..75] {
            *v = f64::NAN;
        }
        let other: Vec<f64> = vec![1.0; 100];
        let s = series(uniform(100, 0.01), &[col, other]);
        let out = interpolate_gaps(&s, 30).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].len(), 40);
        assert_eq!(out[1].len(), 25);
        assert!(out[0].last_time().unwrap() < out[1].first_time().unwrap());
    }

    #[test]
    fn edges_trimmed_and_all_nan_rejected() {
        let s = series(uniform(4, 0.01), &[vec![f64::NAN, 1.0, 2.0, f64::NAN]]);
        let out = interpolate_gaps(&s, 30).unwrap();
        assert_eq!(out[0].len(), 2);
        let bad = series(uniform(3, 0.01), &[vec![f64::NAN; 3]]);
        assert!(matches!(interpolate_gaps(&bad, 30), Err(Error::Data(_))));
    }

    #[test]
    fn moving_average_examples() {
        let s = series(uniform(5, 0.01), &[vec![0.0, 0.0, 3.0, 0.0, 0.0]]);
        assert_eq!(moving_average(&s, 1).unwrap(), s);
        assert_eq!(moving_average(&s, 3).unwrap().column(0), vec![0.0, 1.0, 1.0, 1.0, 0.0]);
        let c = series(uniform(6, 0.01), &[vec![2.5; 6]]);
        for v in moving_average(&c, 5).unwrap().column(0) {
            assert!((v - 2.5).abs() < 1e-15);
        }
        assert!(matches!(moving_average(&s, 2), Err(Error::Parameter(_))));
        assert!(matches!(moving_average(&s, 7), Err(Error::Parameter(_))));
    }

    fn amplitude_ratio(freq: f64, cutoff: f64, fs: f64) -> f64 {
        let n = (2.0 * fs) as usize;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin())
            .collect();
        let y = Biquad::butterworth_lowpass(cutoff, fs).unwrap().filtfilt(&x);
        // Central second, away from edge transients.
        let mid = &y[n / 4..3 * n / 4];
        let peak_y = mid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let peak_x = x[n / 4..3 * n / 4].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        peak_y / peak_x
    }

    #[test]
    fn lowpass_response() {
        let c = series(uniform(50, 0.01), &[vec![3.7; 50]]);
        for v in lowpass(&c, 6.0, 100.0).unwrap().column(0) {
            assert!((v - 3.7).abs() < 1e-9);
        }
        let at_cutoff = amplitude_ratio(6.0, 6.0, 100.0);
        assert!((at_cutoff - 0.5).abs() < 0.05, "{at_cutoff}");
        let pass = amplitude_ratio(0.6, 6.0, 100.0);
        assert!(pass > 0.99, "{pass}");
        assert!(matches!(lowpass(&c, 50.0, 100.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn resample_examples() {
        let t: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let ramp: Vec<f64> = t.iter().map(|x| 3.0 * x - 1.0).collect();
        let s = series(t, &[ramp]);
        let r = resample(&s, 0.01).unwrap();
        assert_eq!(r.len(), 101);
        assert!(is_on_grid(&r, 0.01));
        assert_eq!(r.last_time().unwrap(), 1.0);

        let on_grid = series(uniform(20, 0.01), &[(0..20).map(|i| (i * i) as f64).collect()]);
        assert_eq!(resample(&on_grid, 0.01).unwrap().values(), on_grid.values());

        let t120: Vec<f64> = (0..240).map(|i| 0.003 + i as f64 / 120.0).collect();
        let lin: Vec<f64> = t120.iter().map(|x| 5.0 * x + 2.0).collect();
        let r = resample(&series(t120, &[lin]), 0.01).unwrap();
        assert_eq!(r.first_time().unwrap(), 0.01);
        for (t, v) in r.frames() {
            assert!((v[0] - (5.0 * t + 2.0)).abs() < 1e-9);
        }
        let short = series(vec![0.0, 0.005], &[vec![1.0, 2.0]]);
        assert!(matches!(resample(&short, 0.01), Err(Error::Data(_))));
    }

    proptest! {
        #[test]
        fn resample_is_idempotent(k0 in 0i64..500, n in 2usize..60, seed in 0u64..1000) {
            let t: Vec<f64> = (0..n).map(|i| grid_time(k0 + i as i64, 0.01)).collect();
            let mut rng = crate::numerics::RngStream::new(seed);
            let v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let s = series(t, &[v]);
            let once = resample(&s, 0.01).unwrap();
            prop_assert_eq!(once.values(), s.values());
            prop_assert_eq!(once.timestamps(), s.timestamps());
        }

        #[test]
        fn resampled_timestamps_on_grid(t0 in 0.0f64..3.0, rate in 30.0f64..250.0, n in 10usize..200) {
            let t: Vec<f64> = (0..n).map(|i| t0 + i as f64 / rate).collect();
            let v: Vec<f64> = t.iter().map(|x| x.sin()).collect();
            if let Ok(r) = resample(&series(t.clone(), &[v]), 0.01) {
                prop_assert!(is_on_grid(&r, 0.01));
                prop_assert!(r.first_time().unwrap() >= t[0] - 1e-9);
                prop_assert!(r.last_time().unwrap() <= t[n - 1] + 1e-9);
            }
        }
    }
}
