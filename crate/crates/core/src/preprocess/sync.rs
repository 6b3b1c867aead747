//! Cross-modal alignment on the common grid, task segments, the per-segment
//! chronological split point and windowing.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::features::ChannelStats;
use crate::preprocess::filters::is_on_grid;
use crate::types::{grid_index, TaskLabel, TimeSeries};

/// Minimum overlap accepted by [`synchronize`], in seconds.
pub const MIN_OVERLAP_S: f64 = 1.0;

/// Sensor and skeleton series on one grid with equal frame counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncedDataset {
    pub sensors: TimeSeries,
    pub skeleton: TimeSeries,
    pub period: f64,
    /// Frame-wise task labels; `Unknown` where no span was provided.
    pub labels: Vec<TaskLabel>,
    pub stats: Option<ChannelStats>,
}

impl SyncedDataset {
    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    pub fn grid_start_index(&self) -> i64 {
        self.sensors
            .first_time()
            .and_then(|t| grid_index(t, self.period))
            .unwrap_or(0)
    }

    /// Checks equal counts, equal endpoints and exact grid spacing.
    pub fn validate(&self) -> Result<()> {
        if self.sensors.len() != self.skeleton.len() {
            return Err(Error::Alignment(format!(
                "{} sensor frames vs {} skeleton frames",
                self.sensors.len(),
                self.skeleton.len()
            )));
        }
        if self.sensors.timestamps() != self.skeleton.timestamps() {
            return Err(Error::Alignment("sensor and skeleton timestamps differ".into()));
        }
        if !is_on_grid(&self.sensors, self.period) {
            return Err(Error::Alignment("timestamps are not on the grid".into()));
        }
        if self.labels.len() != self.len() {
            return Err(Error::Alignment("label count differs from frame count".into()));
        }
        Ok(())
    }
}

fn grid_range(series: &TimeSeries, period: f64, name: &str) -> Result<(i64, i64)> {
    if series.is_empty() || !is_on_grid(series, period) {
        return Err(Error::Alignment(format!("{name} series is not on the {period} s grid")));
    }
    let k0 = grid_index(series.first_time().unwrap(), period).unwrap();
    Ok((k0, k0 + series.len() as i64 - 1))
}

/// Trims both grid series to the intersection of their time ranges.
pub fn synchronize(sensors: &TimeSeries, skeleton: &TimeSeries, period: f64) -> Result<SyncedDataset> {
    let (a0, a1) = grid_range(sensors, period, "sensor")?;
    let (b0, b1) = grid_range(skeleton, period, "skeleton")?;
    let (k0, k1) = (a0.max(b0), a1.min(b1));
    if k1 < k0 {
        return Err(Error::Alignment(format!(
            "sensor frames {a0}..={a1} and skeleton frames {b0}..={b1} do not overlap"
        )));
    }
    if ((k1 - k0) as f64) * period < MIN_OVERLAP_S - 1e-9 {
        return Err(Error::Alignment(format!(
            "overlap of {:.3} s is shorter than {MIN_OVERLAP_S} s",
            (k1 - k0) as f64 * period
        )));
    }
    let s = sensors.slice((k0 - a0) as usize..(k1 - a0 + 1) as usize);
    let k = skeleton.slice((k0 - b0) as usize..(k1 - b0 + 1) as usize);
    let n = s.len();
    let out = SyncedDataset {
        sensors: s,
        skeleton: k,
        period,
        labels: vec![TaskLabel::Unknown; n],
        stats: None,
    };
    out.validate()?;
    Ok(out)
}

/// A contiguous run of frames with one task label: one recording.
///
/// Frames `start..split` form the training portion and `split..end` the
/// validation portion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub task: TaskLabel,
    pub start: usize,
    pub end: usize,
    pub split: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn train_range(&self) -> Range<usize> {
        self.start..self.split
    }

    pub fn val_range(&self) -> Range<usize> {
        self.split..self.end
    }
}

/// Chronological split point of `start..end` at `ratio`.
pub fn split_point(start: usize, end: usize, ratio: f64) -> usize {
    start + ((end - start) as f64 * ratio).floor() as usize
}

/// Groups consecutive equal labels into segments split at `ratio`.
pub fn segments_from_labels(labels: &[TaskLabel], ratio: f64) -> Result<Vec<Segment>> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Parameter(format!("split ratio {ratio} not in (0, 1)")));
    }
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            out.push(Segment {
                task: labels[start],
                start,
                end: i,
                split: split_point(start, i, ratio),
            });
            start = i;
        }
    }
    Ok(out)
}

/// Training frame ranges of all segments.
pub fn train_ranges(segments: &[Segment]) -> Vec<Range<usize>> {
    segments.iter().map(|s| s.train_range()).filter(|r| !r.is_empty()).collect()
}

/// A fixed-length slice of frames `start..start + len` inside one segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub segment: usize,
    pub start: usize,
    pub len: usize,
}

impl Window {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

/// Window start positions over `n` frames; the final partial window is dropped.
pub fn window_starts(n: usize, length: usize, stride: usize) -> Vec<usize> {
    if length == 0 || stride == 0 || n < length {
        return Vec::new();
    }
    (0..=(n - length) / stride).map(|i| i * stride).collect()
}

/// Overlapping windows within each segment, in segment order.
pub fn window(segments: &[Segment], length: usize, stride: usize) -> Result<Vec<Window>> {
    if length == 0 || stride == 0 {
        return Err(Error::Parameter("window length and stride must be positive".into()));
    }
    let out: Vec<Window> = segments
        .iter()
        .enumerate()
        .flat_map(|(si, s)| {
            window_starts(s.len(), length, stride).into_iter().map(move |o| Window {
                segment: si,
                start: s.start + o,
                len: length,
            })
        })
        .collect();
    if out.is_empty() {
        return Err(Error::Data(format!("no segment is at least {length} frames long")));
    }
    Ok(out)
}
