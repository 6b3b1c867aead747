//! Model predictions on the held-out part of every segment.

use crate::error::{Error, Result};
use crate::eval::metrics::{joint_errors, JointErrorMatrix};
use crate::eval::report::{build_report, ErrorReport};
use crate::model::{predict_skeleton, ModelConfig, ModelWeights};
use crate::numerics::Real;
use crate::preprocess::PreparedDataset;
use crate::types::TaskLabel;

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: ErrorReport,
    pub errors: JointErrorMatrix,
    pub labels: Vec<TaskLabel>,
    /// Dataset frame index of every evaluated frame.
    pub frames: Vec<usize>,
    /// Labeled segments whose validation range is shorter than the window.
    pub skipped_segments: usize,
}

/// Predicts each segment's validation range as its own series and scores
/// it against the dataset targets. Ranges shorter than the window are
/// skipped.
pub fn evaluate_validation<T: Real>(
    weights: &ModelWeights<T>,
    cfg: &ModelConfig,
    dataset: &PreparedDataset,
) -> Result<Evaluation> {
    let h = &dataset.header;
    if cfg.input_width != h.feature_width || cfg.output_width != h.skeleton_width {
        return Err(Error::Config(format!(
            "model maps {} -> {} channels but the artifacts have {} -> {}",
            cfg.input_width, cfg.output_width, h.feature_width, h.skeleton_width
        )));
    }
    let mut errors = Vec::new();
    let mut labels = Vec::new();
    let mut frames = Vec::new();
    let mut skipped = 0;
    for seg in &h.segments {
        let r = seg.val_range();
        if seg.task == TaskLabel::Unknown || r.is_empty() {
            continue;
        }
        if r.len() < cfg.window {
            skipped += 1;
            continue;
        }
        let pred = predict_skeleton(weights, cfg, &dataset.features.slice(r.clone()), &h.target_stats)?;
        let e = joint_errors(&pred, &dataset.skeleton.slice(r.clone()))?;
        errors.extend_from_slice(e.data());
        labels.extend(std::iter::repeat(seg.task).take(r.len()));
        frames.extend(r);
    }
    if frames.is_empty() {
        return Err(Error::Data(format!(
            "no labeled validation range holds a full {}-frame window",
            cfg.window
        )));
    }
    let errors = JointErrorMatrix::new(frames.len(), errors)?;
    let report = build_report(&errors, &labels)?;
    Ok(Evaluation {
        report,
        errors,
        labels,
        frames,
        skipped_segments: skipped,
    })
}
