//! Ankle IMU readings derived from shank motion.
//!
//! The sensor frame is the shank frame: its `y` axis points from ankle to
//! knee, so a standing subject reads `+g` on `ay`.

use nalgebra::{Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::types::{FootSide, JointId, SeriesMeta, SkeletonSeries, TimeSeries};

type V3 = Vector3<f64>;

pub const GRAVITY: f64 = 9.81;

fn joint(series: &SkeletonSeries, f: usize, j: JointId) -> V3 {
    let r = &series.frame(f)[j.index() * 3..j.index() * 3 + 3];
    V3::new(r[0], r[1], r[2])
}

fn shank_rotation(series: &SkeletonSeries, f: usize, side: FootSide) -> UnitQuaternion<f64> {
    let (knee, ankle) = match side {
        FootSide::Left => (JointId::LShin, JointId::LFoot),
        FootSide::Right => (JointId::RShin, JointId::RFoot),
    };
    let axis = joint(series, f, ankle) - joint(series, f, knee);
    let rot = Rotation3::rotation_between(&-V3::y(), &axis).unwrap_or_else(Rotation3::identity);
    UnitQuaternion::from_rotation_matrix(&rot)
}

/// `[gx, gy, gz, ax, ay, az]` per frame: angular rate in rad/s and specific
/// force in m/s², both in the shank frame. Central differences inside,
/// one-sided at the ends.
pub fn imu_forward(series: &SkeletonSeries, side: FootSide) -> Result<TimeSeries> {
    let n = series.len();
    if n < 3 {
        return Err(Error::Data(format!("IMU synthesis needs at least 3 frames, got {n}")));
    }
    let ankle = match side {
        FootSide::Left => JointId::LFoot,
        FootSide::Right => JointId::RFoot,
    };
    let t = series.timestamps();
    let rots: Vec<UnitQuaternion<f64>> = (0..n).map(|f| shank_rotation(series, f, side)).collect();
    let pos: Vec<V3> = (0..n).map(|f| joint(series, f, ankle)).collect();
    let mut values = Vec::with_capacity(n * 6);
    for f in 0..n {
        let c = f.clamp(1, n - 2);
        let (a, b) = (c - 1, c + 1);
        let omega = (rots[a].inverse() * rots[b]).scaled_axis() / (t[b] - t[a]);
        let (h1, h2) = (t[c] - t[a], t[b] - t[c]);
        let acc_mm =
            2.0 * (h1 * pos[b] - (h1 + h2) * pos[c] + h2 * pos[a]) / (h1 * h2 * (h1 + h2));
        let specific = acc_mm / 1000.0 + V3::new(0.0, GRAVITY, 0.0);
        let local = rots[f].inverse() * specific;
        values.extend_from_slice(&[omega.x, omega.y, omega.z, local.x, local.y, local.z]);
    }
    TimeSeries::new(t.to_vec(), 6, values, SeriesMeta::default())
}
