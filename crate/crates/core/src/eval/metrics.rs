//! Per-joint Euclidean errors and their summary statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{JointId, TimeSeries, JOINT_COUNT, SKELETON_WIDTH};

/// Frame × joint Euclidean distances in millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct JointErrorMatrix {
    frames: usize,
    data: Vec<f64>,
}

impl JointErrorMatrix {
    pub fn new(frames: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != frames * JOINT_COUNT {
            return Err(Error::Shape(format!(
                "{} errors for {frames} frames × {JOINT_COUNT} joints",
                data.len()
            )));
        }
        if data.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::Data("joint errors must be finite and non-negative".into()));
        }
        Ok(JointErrorMatrix { frames, data })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn get(&self, frame: usize, joint: usize) -> f64 {
        self.data[frame * JOINT_COUNT + joint]
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.data[frame * JOINT_COUNT..(frame + 1) * JOINT_COUNT]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// `e[f][j] = ‖pred_j − truth_j‖₂`.
pub fn joint_errors(pred: &TimeSeries, truth: &TimeSeries) -> Result<JointErrorMatrix> {
    if pred.width() != SKELETON_WIDTH || truth.width() != SKELETON_WIDTH {
        return Err(Error::Shape(format!(
            "skeleton series must have width {SKELETON_WIDTH}, got {} and {}",
            pred.width(),
            truth.width()
        )));
    }
    if pred.len() != truth.len() {
        return Err(Error::Alignment(format!("{} predicted vs {} true frames", pred.len(), truth.len())));
    }
    if let Some(i) = pred
        .timestamps()
        .iter()
        .zip(truth.timestamps())
        .position(|(a, b)| (a - b).abs() > 1e-9)
    {
        return Err(Error::Alignment(format!(
            "timestamps differ at frame {i}: {} vs {}",
            pred.timestamps()[i],
            truth.timestamps()[i]
        )));
    }
    let data = pred
        .values()
        .chunks_exact(3)
        .zip(truth.values().chunks_exact(3))
        .map(|(p, t)| ((p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2) + (p[2] - t[2]).powi(2)).sqrt())
        .collect();
    JointErrorMatrix::new(pred.len(), data)
}

/// A subset of frames and joints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub frames: Vec<usize>,
    pub joints: Vec<usize>,
}

impl Selection {
    pub fn all(errors: &JointErrorMatrix) -> Selection {
        Selection {
            frames: (0..errors.frames()).collect(),
            joints: (0..JOINT_COUNT).collect(),
        }
    }

    pub fn frames(frames: Vec<usize>) -> Selection {
        Selection {
            frames,
            joints: (0..JOINT_COUNT).collect(),
        }
    }

    pub fn with_joints(mut self, joints: &[JointId]) -> Selection {
        self.joints = joints.iter().map(|j| j.index()).collect();
        self
    }

    fn values(&self, errors: &JointErrorMatrix) -> Result<Vec<f64>> {
        if self.frames.is_empty() || self.joints.is_empty() {
            return Err(Error::Parameter("empty error selection".into()));
        }
        if let Some(f) = self.frames.iter().find(|&&f| f >= errors.frames()) {
            return Err(Error::Parameter(format!("frame {f} out of range")));
        }
        if let Some(j) = self.joints.iter().find(|&&j| j >= JOINT_COUNT) {
            return Err(Error::Parameter(format!("joint {j} out of range")));
        }
        Ok(self
            .frames
            .iter()
            .flat_map(|&f| self.joints.iter().map(move |&j| errors.get(f, j)))
            .collect())
    }
}

/// `sqrt(mean(e²))` over the selection.
pub fn rmse(errors: &JointErrorMatrix, sel: &Selection) -> Result<f64> {
    Ok(summarize(&sel.values(errors)?)?.rmse)
}

/// Median (midpoint of the two middle values at even counts) and
/// population standard deviation.
pub fn median_std(errors: &JointErrorMatrix, sel: &Selection) -> Result<(f64, f64)> {
    let s = summarize(&sel.values(errors)?)?;
    Ok((s.median, s.std))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub rmse: f64,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub max: f64,
    /// Sum of squared errors, kept for pooling.
    pub sum_sq: f64,
}

pub fn summarize(values: &[f64]) -> Result<ErrorStats> {
    if values.is_empty() {
        return Err(Error::Parameter("empty error selection".into()));
    }
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    // Sum in sorted order so the result does not depend on frame order.
    let sum: f64 = sorted.iter().sum();
    let sum_sq: f64 = sorted.iter().map(|e| e * e).sum();
    let mean = sum / n;
    let var = sorted.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    Ok(ErrorStats {
        count: values.len(),
        rmse: (sum_sq / n).sqrt(),
        mean,
        median,
        std: var.sqrt(),
        max: sorted[sorted.len() - 1],
        sum_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use crate::types::SeriesMeta;
    use proptest::prelude::*;

    fn skel(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> TimeSeries {
        let t = (0..n).map(|i| i as f64 * 0.01).collect();
        let v = (0..n * SKELETON_WIDTH).map(|k| f(k / SKELETON_WIDTH, k % SKELETON_WIDTH)).collect();
        TimeSeries::new(t, SKELETON_WIDTH, v, SeriesMeta::default()).unwrap()
    }

    #[test]
    fn three_four_five() {
        let truth = skel(3, |_, c| c as f64);
        let mut pred = truth.clone();
        pred.frame_mut(1)[6] += 3.0;
        pred.frame_mut(1)[7] += 4.0;
        let e = joint_errors(&pred, &truth).unwrap();
        assert_eq!(e.get(1, 2), 5.0);
        assert_eq!(e.data().iter().filter(|v| **v != 0.0).count(), 1);
        assert!(joint_errors(&truth, &truth).unwrap().data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn misaligned_timestamps() {
        let a = skel(3, |_, _| 0.0);
        let mut times = a.timestamps().to_vec();
        times[2] += 0.005;
        let b = TimeSeries::new(times, SKELETON_WIDTH, a.values().to_vec(), SeriesMeta::default()).unwrap();
        assert!(matches!(joint_errors(&a, &b), Err(Error::Alignment(_))));
        assert!(matches!(joint_errors(&a, &skel(2, |_, _| 0.0)), Err(Error::Alignment(_))));
    }

    #[test]
    fn brute_force_random_pair() {
        let mut r = RngStream::new(3);
        let a = skel(10, |_, _| r.normal() * 100.0);
        let mut r = RngStream::new(4);
        let b = skel(10, |_, _| r.normal() * 100.0);
        let e = joint_errors(&a, &b).unwrap();
        for f in 0..10 {
            for j in 0..JOINT_COUNT {
                let mut s = 0.0;
                for ax in 0..3 {
                    let d = a.values()[f * 63 + j * 3 + ax] - b.values()[f * 63 + j * 3 + ax];
                    s += d * d;
                }
                assert!((e.get(f, j) - s.sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hand_examples() {
        assert!((summarize(&[10.0; 7]).unwrap().rmse - 10.0).abs() < 1e-12);
        assert!((summarize(&[0.0, 10.0]).unwrap().rmse - 50f64.sqrt()).abs() < 1e-12);
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert!((s.std - 1.25f64.sqrt()).abs() < 1e-15);
        let c = summarize(&[3.5; 5]).unwrap();
        assert_eq!((c.median, c.std), (3.5, 0.0));
        assert!(summarize(&[]).is_err());
        let m = JointErrorMatrix::new(1, vec![1.0; 21]).unwrap();
        assert!(matches!(
            rmse(&m, &Selection::frames(vec![])),
            Err(Error::Parameter(_))
        ));
    }

    proptest! {
        #[test]
        fn rmse_bounds_and_pooling(v in prop::collection::vec(0.0f64..500.0, 2..200usize)) {
            let s = summarize(&v).unwrap();
            prop_assert!(s.rmse + 1e-9 >= s.mean);
            let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!(s.median <= s.max && s.median >= min);
            let half = v.len() / 2;
            let (a, b) = (&v[..half], &v[half..2 * half]);
            if half > 0 {
                let (ra, rb) = (summarize(a).unwrap().rmse, summarize(b).unwrap().rmse);
                let pooled = summarize(&v[..2 * half]).unwrap().rmse;
                prop_assert!((pooled - ((ra * ra + rb * rb) / 2.0).sqrt()).abs() < 1e-9);
            }
            let mut rev = v.clone();
            rev.reverse();
            prop_assert_eq!(summarize(&rev).unwrap(), s);
        }
    }
}
