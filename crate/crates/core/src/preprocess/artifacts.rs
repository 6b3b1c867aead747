//! On-disk form of a preprocessed dataset.
//!
//! ```text
//! <dir>/header.json    shape, grid, layout, statistics, segments, hashes
//! <dir>/features.f32   frames × feature_width, little-endian f32, row-major
//! <dir>/skeleton.f32   frames × 63, little-endian f32, row-major (mm)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::features::{ChannelStats, TargetStats};
use crate::preprocess::pipeline::PreprocessConfig;
use crate::preprocess::sync::Segment;
use crate::types::{frame_channel_names, grid_time, SeriesMeta, TaskLabel, TimeSeries, SKELETON_WIDTH};

pub const HEADER_FILE: &str = "header.json";
pub const FEATURES_FILE: &str = "features.f32";
pub const SKELETON_FILE: &str = "skeleton.f32";
pub const ARTIFACT_FORMAT: &str = "insole-pose-artifacts";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactHeader {
    pub format: String,
    pub version: u32,
    pub frames: usize,
    pub feature_width: usize,
    pub skeleton_width: usize,
    pub grid_period: f64,
    pub grid_start_index: i64,
    pub with_derivatives: bool,
    pub root_relative: bool,
    pub channel_layout: Vec<String>,
    pub feature_stats: ChannelStats,
    pub target_stats: TargetStats,
    pub segments: Vec<Segment>,
    pub config: PreprocessConfig,
    pub config_hash: String,
    pub raw_data_hash: String,
}

/// Feature column names: `L.p00`, ... and, with derivatives, `d1:` and
/// `d2:` prefixed copies.
pub fn feature_layout(with_derivatives: bool) -> Vec<String> {
    let base = frame_channel_names();
    if !with_derivatives {
        return base;
    }
    let mut out = base.clone();
    out.extend(base.iter().map(|n| format!("d1:{n}")));
    out.extend(base.iter().map(|n| format!("d2:{n}")));
    out
}

/// Features, skeleton targets and their header, held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDataset {
    pub header: ArtifactHeader,
    pub features: TimeSeries,
    pub skeleton: TimeSeries,
}

impl PreparedDataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Label of every frame, expanded from the segments.
    pub fn labels(&self) -> Vec<TaskLabel> {
        let mut out = vec![TaskLabel::Unknown; self.len()];
        for s in &self.header.segments {
            out[s.start..s.end].fill(s.task);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        let bad = |m: String| Err(Error::Format(m));
        if h.format != ARTIFACT_FORMAT || h.version != ARTIFACT_VERSION {
            return bad(format!("unsupported artifact format {} v{}", h.format, h.version));
        }
        if self.features.len() != h.frames || self.skeleton.len() != h.frames {
            return bad(format!("header declares {} frames", h.frames));
        }
        if self.features.width() != h.feature_width || h.channel_layout.len() != h.feature_width {
            return bad(format!("feature width {} does not match header", self.features.width()));
        }
        if h.skeleton_width != SKELETON_WIDTH || self.skeleton.width() != SKELETON_WIDTH {
            return bad(format!("skeleton width must be {SKELETON_WIDTH}"));
        }
        let base = if h.with_derivatives { h.feature_width / 3 } else { h.feature_width };
        if h.feature_stats.width() != base || h.target_stats.width() != SKELETON_WIDTH {
            return bad("statistics widths do not match the layout".into());
        }
        let mut next = 0;
        for s in &h.segments {
            if s.start != next || s.end <= s.start || s.split < s.start || s.split > s.end {
                return bad(format!("segment {s:?} is inconsistent"));
            }
            next = s.end;
        }
        if next != h.frames {
            return bad("segments do not cover all frames".into());
        }
        Ok(())
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        self.validate()?;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut header = serde_json::to_string_pretty(&self.header)?;
        header.push('\n');
        write(&dir.join(HEADER_FILE), header.as_bytes())?;
        write(&dir.join(FEATURES_FILE), &to_f32_bytes(self.features.values()))?;
        write(&dir.join(SKELETON_FILE), &to_f32_bytes(self.skeleton.values()))?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<PreparedDataset> {
        let dir = dir.as_ref();
        let hp = dir.join(HEADER_FILE);
        let text = std::fs::read_to_string(&hp).map_err(|e| Error::io(&hp, e))?;
        let header: ArtifactHeader = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", hp.display())))?;
        let times: Vec<f64> = (0..header.frames as i64)
            .map(|i| grid_time(header.grid_start_index + i, header.grid_period))
            .collect();
        let read = |name: &str, width: usize| -> Result<TimeSeries> {
            let p = dir.join(name);
            let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
            if bytes.len() != header.frames * width * 4 {
                return Err(Error::Format(format!(
                    "{}: {} bytes, expected {}",
                    p.display(),
                    bytes.len(),
                    header.frames * width * 4
                )));
            }
            TimeSeries::new(times.clone(), width, from_f32_bytes(&bytes), SeriesMeta::default())
                .map_err(|e| Error::Format(format!("{}: {e}", p.display())))
        };
        let features = read(FEATURES_FILE, header.feature_width)?;
        let skeleton = read(SKELETON_FILE, header.skeleton_width)?;
        let out = PreparedDataset {
            header,
            features,
            skeleton,
        };
        out.validate()?;
        Ok(out)
    }

    /// The dataset as it reads back from disk: values rounded to f32.
    pub fn rounded_to_f32(&self) -> PreparedDataset {
        let round = |s: &TimeSeries| {
            s.with_values(s.width(), s.values().iter().map(|v| *v as f32 as f64).collect())
                .expect("same shape")
        };
        PreparedDataset {
            header: self.header.clone(),
            features: round(&self.features),
            skeleton: round(&self.skeleton),
        }
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn to_f32_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| (*v as f32).to_le_bytes()).collect()
}

pub fn from_f32_bytes(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect()
}
