//! Parametric motion templates and a rigid 21-joint skeleton.
//!
//! World frame: millimetres, `y` up, `z` forward, `x` toward the subject's
//! left. Legs are solved with two-link inverse kinematics so the ankles can
//! be placed directly; the upper body is forward kinematics from the pelvis.

use std::f64::consts::{PI, TAU};

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::RngStream;
use crate::types::{FootSide, JointId, SeriesMeta, SkeletonSeries, TaskLabel, TimeSeries, JOINT_COUNT, SKELETON_WIDTH};

pub const STANDING_HIPS_Y: f64 = 950.0;
pub const ANKLE_Y: f64 = 80.0;
pub const ANKLE_X: f64 = 100.0;
pub const HIP_OFFSET: [f64; 3] = [90.0, -60.0, 0.0];
pub const THIGH: f64 = 420.0;
pub const SHIN: f64 = 400.0;
pub const UPPER_ARM: f64 = 290.0;
pub const FOREARM: f64 = 250.0;
/// Heel to toe tip.
pub const FOOT_LENGTH: f64 = 240.0;
/// Ankle ahead of the heel.
pub const HEEL_BACK: f64 = 50.0;
/// Ankle lift above the ground below which a foot counts as in contact.
pub const CONTACT_LIFT: f64 = 5.0;
/// Duration of the amplitude ramp at both ends of a task.
pub const RAMP_S: f64 = 0.5;

type V3 = Vector3<f64>;

/// Low-dimensional pose from which every joint is derived.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub hips: V3,
    /// Forward lean of the trunk, radians.
    pub trunk_pitch: f64,
    /// Sideways lean, positive toward the subject's left.
    pub trunk_roll: f64,
    /// Ankle positions, left then right.
    pub ankles: [V3; 2],
    pub shoulder_flex: [f64; 2],
    pub elbow_flex: [f64; 2],
}

impl Pose {
    pub fn neutral() -> Pose {
        Pose {
            hips: V3::new(0.0, STANDING_HIPS_Y, 0.0),
            trunk_pitch: 0.0,
            trunk_roll: 0.0,
            ankles: [V3::new(ANKLE_X, ANKLE_Y, 0.0), V3::new(-ANKLE_X, ANKLE_Y, 0.0)],
            shoulder_flex: [0.0; 2],
            elbow_flex: [0.15; 2],
        }
    }

    pub fn lift(&self, side: FootSide) -> f64 {
        self.ankles[side_index(side)].y - ANKLE_Y
    }

    pub fn in_contact(&self, side: FootSide) -> bool {
        self.lift(side) < CONTACT_LIFT
    }
}

pub fn side_index(side: FootSide) -> usize {
    match side {
        FootSide::Left => 0,
        FootSide::Right => 1,
    }
}

/// Timing and amplitude of one task's movement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionTemplate {
    pub task: TaskLabel,
    pub period_s: f64,
    /// Main amplitude in mm or radians, task dependent (squat depth, tilt
    /// shift, bow angle, ...).
    pub amplitude: f64,
}

impl MotionTemplate {
    pub fn default_for(task: TaskLabel) -> MotionTemplate {
        let (period_s, amplitude) = match task {
            TaskLabel::OneLegStand => (6.0, 150.0),
            TaskLabel::TiltLeftRight => (4.0, 70.0),
            TaskLabel::Bow => (5.0, 1.0),
            TaskLabel::Squat => (4.0, 300.0),
            TaskLabel::StandAndSit => (6.0, 450.0),
            TaskLabel::Walk => (1.2, 100.0),
            TaskLabel::Jump => (1.5, 120.0),
            TaskLabel::OneLegHop => (0.8, 60.0),
            TaskLabel::Free => (7.0, 1.0),
            TaskLabel::Unknown => (1.0, 0.0),
        };
        MotionTemplate {
            task,
            period_s,
            amplitude,
        }
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Amplitude envelope at local time `tau` of a task lasting `duration`.
pub fn ramp(tau: f64, duration: f64) -> f64 {
    smoothstep(tau / RAMP_S) * smoothstep((duration - tau) / RAMP_S)
}

/// Non-negative bump `sin(π (u − a) / (b − a))` on `[a, b]`, zero elsewhere.
fn bump(u: f64, a: f64, b: f64) -> f64 {
    if u <= a || u >= b {
        0.0
    } else {
        (PI * (u - a) / (b - a)).sin()
    }
}

/// Slow postural sway, a few millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sway {
    pub phases: [f64; 4],
    pub amplitude_mm: f64,
}

impl Sway {
    pub fn from_rng(rng: &mut RngStream, amplitude_mm: f64) -> Sway {
        Sway {
            phases: [0; 4].map(|_| rng.uniform(0.0, TAU)),
            amplitude_mm,
        }
    }

    pub fn none() -> Sway {
        Sway {
            phases: [0.0; 4],
            amplitude_mm: 0.0,
        }
    }

    fn offset(&self, t: f64) -> (f64, f64) {
        let a = self.amplitude_mm;
        let p = self.phases;
        (
            a * (0.6 * (TAU * t / 2.7 + p[0]).sin() + 0.4 * (TAU * t / 1.3 + p[1]).sin()),
            a * (0.6 * (TAU * t / 3.1 + p[2]).sin() + 0.4 * (TAU * t / 1.7 + p[3]).sin()),
        )
    }
}

/// Pose of `template` at local time `tau` within a task of `duration`.
pub fn template_pose(template: &MotionTemplate, tau: f64, duration: f64, sway: &Sway) -> Pose {
    let mut p = Pose::neutral();
    let r = ramp(tau, duration);
    let a = template.amplitude;
    let phi = TAU * tau / template.period_s;
    let u = (tau / template.period_s).rem_euclid(1.0);
    let s = (1.0 - phi.cos()) / 2.0;
    match template.task {
        TaskLabel::OneLegStand => {
            p.hips.x += 60.0 * r;
            p.ankles[1].y += a * r;
            p.ankles[1].z -= 0.4 * a * r;
            p.shoulder_flex = [0.2 * r; 2];
        }
        TaskLabel::TiltLeftRight => {
            p.hips.x += a * phi.sin() * r;
            p.trunk_roll = 0.2 * phi.sin() * r;
            p.shoulder_flex = [0.1 * r; 2];
        }
        TaskLabel::Bow => {
            p.trunk_pitch = a * s * r;
            p.hips.z -= 80.0 * s * r;
            p.hips.y -= 20.0 * s * r;
            p.shoulder_flex = [0.9 * a * s * r; 2];
        }
        TaskLabel::Squat => {
            p.hips.y -= a * s * r;
            p.hips.z -= 0.35 * a * s * r;
            p.trunk_pitch = 0.5 * s * r;
            p.shoulder_flex = [1.3 * s * r; 2];
            p.elbow_flex = [0.15 + 0.2 * s * r; 2];
        }
        TaskLabel::StandAndSit => {
            // Down over the first 30% of a cycle, seated until 60%, up by 90%.
            let seat = smoothstep(u / 0.3) * (1.0 - smoothstep((u - 0.6) / 0.3));
            p.hips.y -= a * seat * r;
            p.hips.z -= 0.45 * a * seat * r;
            p.trunk_pitch = (0.35 * seat + 0.3 * (PI * seat).sin()) * r;
            p.shoulder_flex = [0.4 * seat * r; 2];
            p.elbow_flex = [0.15 + 0.6 * seat * r; 2];
        }
        TaskLabel::Walk => {
            let l = phi.sin().max(0.0).powi(2);
            let rr = (-phi.sin()).max(0.0).powi(2);
            p.ankles[0].y += a * l * r;
            p.ankles[0].z += 0.2 * a * l * r;
            p.ankles[1].y += a * rr * r;
            p.ankles[1].z += 0.2 * a * rr * r;
            p.hips.x -= 40.0 * phi.sin() * r;
            p.hips.y -= 15.0 * (2.0 * phi).sin().abs() * r;
            p.shoulder_flex = [-0.4 * phi.sin() * r, 0.4 * phi.sin() * r];
        }
        TaskLabel::Jump => {
            let crouch = bump(u, 0.0, 0.4).powi(2);
            let flight = bump(u, 0.45, 0.75);
            let land = bump(u, 0.75, 1.0).powi(2);
            p.hips.y += (-150.0 * crouch - 100.0 * land + a * flight) * r;
            p.hips.z -= 60.0 * (crouch + land) * r;
            p.trunk_pitch = 0.4 * (crouch + land) * r;
            for ankle in &mut p.ankles {
                ankle.y += a * flight * r;
            }
            p.shoulder_flex = [(-0.6 * crouch + 1.8 * flight) * r; 2];
        }
        TaskLabel::OneLegHop => {
            let crouch = bump(u, 0.0, 0.4).powi(2);
            let flight = bump(u, 0.45, 0.85);
            p.hips.x += 60.0 * r;
            p.hips.y += (-80.0 * crouch + a * flight) * r;
            p.ankles[0].y += a * flight * r;
            p.ankles[1].y += 150.0 * r + a * flight * r;
            p.ankles[1].z -= 60.0 * r;
            p.shoulder_flex = [0.3 * r; 2];
        }
        TaskLabel::Free => {
            p.hips.x += 40.0 * (TAU * tau / 5.3).sin() * r;
            p.trunk_pitch = 0.4 * a * (1.0 - (TAU * tau / 7.0).cos()) / 2.0 * r;
            p.hips.y -= 80.0 * (1.0 - (TAU * tau / 4.1).cos()) / 2.0 * r;
            p.shoulder_flex = [0.6 * (TAU * tau / 3.3).sin().abs() * r, 0.3 * r];
        }
        TaskLabel::Unknown => {}
    }
    let (sx, sz) = sway.offset(tau);
    p.hips.x += sx * r;
    p.hips.z += sz * r;
    p
}

/// Knee position for a hip and ankle with fixed thigh and shin lengths,
/// bending toward +z. The ankle is pulled in if out of reach.
fn solve_leg(hip: V3, ankle: V3) -> (V3, V3) {
    let v = ankle - hip;
    let reach = (THIGH + SHIN) * 0.999;
    let d = v.norm().clamp((THIGH - SHIN).abs() + 1.0, reach);
    let dir = v / v.norm();
    let ankle = hip + dir * d;
    let a = (THIGH * THIGH - SHIN * SHIN + d * d) / (2.0 * d);
    let h = (THIGH * THIGH - a * a).max(0.0).sqrt();
    let fwd = V3::z();
    let n = (fwd - dir * fwd.dot(&dir)).normalize();
    (hip + dir * a + n * h, ankle)
}

/// All 21 joint positions, in [`JointId`] order.
pub fn forward_kinematics(p: &Pose) -> [V3; JOINT_COUNT] {
    use JointId::*;
    let mut j = [V3::zeros(); JOINT_COUNT];
    let trunk = trunk_basis(p);
    let up = |x: f64, y: f64, z: f64| trunk * V3::new(x, y, z);
    j[Hips.index()] = p.hips;
    j[Ab.index()] = p.hips + up(0.0, 100.0, 0.0);
    j[Chest.index()] = j[Ab.index()] + up(0.0, 180.0, 0.0);
    j[Neck.index()] = j[Chest.index()] + up(0.0, 170.0, 0.0);
    j[Head.index()] = j[Neck.index()] + up(0.0, 120.0, 20.0);

    for (side, sign) in [(0usize, 1.0), (1, -1.0)] {
        let (sh, ua, fa, hand) = if side == 0 {
            (LShoulder, LUArm, LFArm, LHand)
        } else {
            (RShoulder, RUArm, RFArm, RHand)
        };
        j[sh.index()] = j[Chest.index()] + up(sign * 40.0, 150.0, 0.0);
        j[ua.index()] = j[sh.index()] + up(sign * 120.0, 0.0, 0.0);
        let arm = trunk * flex(p.shoulder_flex[side]);
        j[fa.index()] = j[ua.index()] + arm * V3::new(0.0, -UPPER_ARM, 0.0);
        let fore = arm * flex(p.elbow_flex[side]);
        j[hand.index()] = j[fa.index()] + fore * V3::new(0.0, -FOREARM, 0.0);

        let (th, sn, ft, toe) = if side == 0 {
            (LThigh, LShin, LFoot, LToe)
        } else {
            (RThigh, RShin, RFoot, RToe)
        };
        let hip = p.hips + V3::new(sign * HIP_OFFSET[0], HIP_OFFSET[1], HIP_OFFSET[2]);
        let (knee, ankle) = solve_leg(hip, p.ankles[side]);
        j[th.index()] = hip;
        j[sn.index()] = knee;
        j[ft.index()] = ankle;
        j[toe.index()] = ankle + V3::new(0.0, -60.0, 140.0);
    }
    j
}

/// Trunk rotation: pitch leans +y toward +z, roll leans +y toward +x.
fn trunk_basis(p: &Pose) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&V3::z_axis(), -p.trunk_roll) * Rotation3::from_axis_angle(&V3::x_axis(), p.trunk_pitch)
}

/// Forward flexion: a hanging segment `(0, -1, 0)` swings toward +z.
fn flex(angle: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&V3::x_axis(), -angle)
}

/// Equal-weight centre of the joints.
pub fn center_of_mass(joints: &[V3; JOINT_COUNT]) -> V3 {
    joints.iter().sum::<V3>() / JOINT_COUNT as f64
}

/// A task sequence laid out on the common clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Choreography {
    pub items: Vec<(MotionTemplate, f64, f64, Sway)>,
}

impl Choreography {
    /// Consecutive tasks of `duration` seconds each, starting at 0.
    pub fn sequential(tasks: &[MotionTemplate], duration: f64, sway_mm: f64, rng: &RngStream) -> Choreography {
        let items = tasks
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut r = rng.fork(i as u64);
                (*t, i as f64 * duration, duration, Sway::from_rng(&mut r, sway_mm))
            })
            .collect();
        Choreography { items }
    }

    pub fn end(&self) -> f64 {
        self.items.last().map_or(0.0, |(_, s, d, _)| s + d)
    }

    /// The active template and local time at `t`; the last task covers its end point.
    pub fn locate(&self, t: f64) -> Option<(&MotionTemplate, f64, f64, &Sway)> {
        let n = self.items.len();
        self.items.iter().enumerate().find_map(|(i, (m, s, d, sw))| {
            let inside = t >= *s && (t < s + d || (i + 1 == n && t <= s + d));
            inside.then_some((m, t - s, *d, sw))
        })
    }

    /// Pose at time `t` (neutral outside every task).
    pub fn pose(&self, t: f64) -> Pose {
        match self.locate(t) {
            Some((m, tau, d, sw)) => template_pose(m, tau, d, sw),
            None => Pose::neutral(),
        }
    }

    pub fn template_at(&self, t: f64) -> Option<&MotionTemplate> {
        self.locate(t).map(|(m, ..)| m)
    }
}

fn to_values(joints: &[V3; JOINT_COUNT], out: &mut Vec<f64>) {
    for j in joints {
        out.extend_from_slice(&[j.x, j.y, j.z]);
    }
}

/// Clean joint trajectories sampled at `times`.
pub fn sample_skeleton(choreo: &Choreography, times: &[f64]) -> Result<SkeletonSeries> {
    let mut values = Vec::with_capacity(times.len() * SKELETON_WIDTH);
    for &t in times {
        to_values(&forward_kinematics(&choreo.pose(t)), &mut values);
    }
    TimeSeries::new(times.to_vec(), SKELETON_WIDTH, values, SeriesMeta::default())
}

/// One template for `duration` seconds at `rate` Hz with sway drawn from `seed`.
pub fn generate_skeleton(template: &MotionTemplate, duration: f64, rate: f64, seed: u64) -> Result<SkeletonSeries> {
    let choreo = Choreography::sequential(&[*template], duration, 2.0, &RngStream::new(seed));
    let n = (duration * rate).round() as usize;
    let times: Vec<f64> = (0..n).map(|k| k as f64 / rate).collect();
    let mut s = sample_skeleton(&choreo, &times)?;
    s.meta = SeriesMeta {
        subject: Some("synthetic".into()),
        task: Some(template.task),
        sample_rate: Some(rate),
    };
    Ok(s)
}
