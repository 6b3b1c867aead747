//! Foot loads, centre of pressure and taxel forces.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::{amplifier_gain, sensor_voltage_to_count, AmplifierParams};
use crate::synth::kinematics::{
    center_of_mass, forward_kinematics, side_index, Choreography, Pose, FOOT_LENGTH, HEEL_BACK,
};
use crate::synth::layout::TaxelLayout;
use crate::types::{FootSide, PRESSURE_CHANNELS};

/// Parameters of the pressure forward model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PressureModel {
    pub body_weight_n: f64,
    /// Force on one taxel at which its output saturates.
    pub full_scale_n: f64,
    /// Spread of the pressure blob, foot-length units.
    pub sigma: f64,
}

impl Default for PressureModel {
    fn default() -> Self {
        PressureModel {
            body_weight_n: 700.0,
            full_scale_n: 80.0,
            sigma: 0.15,
        }
    }
}

/// Static load on each foot in newtons, left then right. With both feet
/// down the weight splits by the lever rule on the lateral COM position;
/// in single support the standing foot carries all of it.
pub fn foot_loads(pose: &Pose, com: &Vector3<f64>, model: &PressureModel) -> [f64; 2] {
    let total = model.body_weight_n;
    let (l, r) = (pose.in_contact(FootSide::Left), pose.in_contact(FootSide::Right));
    match (l, r) {
        (true, true) => {
            let (al, ar) = (pose.ankles[0].x, pose.ankles[1].x);
            let share = ((com.x - ar) / (al - ar)).clamp(0.0, 1.0);
            [total * share, total * (1.0 - share)]
        }
        (true, false) => [total, 0.0],
        (false, true) => [0.0, total],
        (false, false) => [0.0, 0.0],
    }
}

/// Centre of pressure of one foot in layout coordinates.
pub fn center_of_pressure(pose: &Pose, com: &Vector3<f64>, side: FootSide) -> [f64; 2] {
    let ankle = pose.ankles[side_index(side)];
    let y = ((com.z - (ankle.z - HEEL_BACK)) / FOOT_LENGTH).clamp(0.1, 0.9);
    let x = ((com.x - ankle.x) / FOOT_LENGTH).clamp(-0.15, 0.15);
    [x, y]
}

/// Distributes `load` over the taxels as a normalized Gaussian around `cop`.
pub fn taxel_forces(layout: &TaxelLayout, side: FootSide, cop: [f64; 2], load: f64, sigma: f64) -> [f64; PRESSURE_CHANNELS] {
    let mut w = [0.0; PRESSURE_CHANNELS];
    for (k, wk) in w.iter_mut().enumerate() {
        let [x, y] = layout.position(side, k);
        *wk = (-((x - cop[0]).powi(2) + (y - cop[1]).powi(2)) / (2.0 * sigma * sigma)).exp();
    }
    let sum: f64 = w.iter().sum();
    w.map(|v| load * v / sum)
}

/// Sensor-side voltage of a taxel carrying `force` newtons.
pub fn force_to_voltage(force: f64, model: &PressureModel, amp: &AmplifierParams) -> Result<f64> {
    let vmax = amp.supply_volts / amplifier_gain(amp)?;
    Ok(vmax * (force.max(0.0) / model.full_scale_n).min(1.0))
}

/// ADC count the acquisition board reports for `volts`.
pub fn voltage_to_adc(volts: f64, amp: &AmplifierParams) -> Result<u32> {
    sensor_voltage_to_count(volts, amp)
}

/// Clean taxel forces for both feet at time `t`.
pub fn pressure_forward(
    choreo: &Choreography,
    t: f64,
    layout: &TaxelLayout,
    model: &PressureModel,
) -> [[f64; PRESSURE_CHANNELS]; 2] {
    let pose = choreo.pose(t);
    let com = center_of_mass(&forward_kinematics(&pose));
    let loads = foot_loads(&pose, &com, model);
    FootSide::BOTH.map(|side| {
        let i = side_index(side);
        let cop = center_of_pressure(&pose, &com, side);
        taxel_forces(layout, side, cop, loads[i], model.sigma)
    })
}
