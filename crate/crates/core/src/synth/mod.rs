//! Deterministic synthetic recordings: a kinematic skeleton driven by task
//! templates, with insole pressure and ankle IMU streams derived from it.

pub mod emit;
pub mod imu;
pub mod kinematics;
pub mod layout;
pub mod pressure;

pub use emit::{emit_dataset, synthesize, ClockOffsets, NoiseConfig, SynthConfig, SynthManifest, SynthOutput};
pub use imu::imu_forward;
pub use kinematics::{forward_kinematics, generate_skeleton, Choreography, MotionTemplate, Pose};
pub use layout::{foot_half_width, TaxelLayout};
pub use pressure::{foot_loads, pressure_forward, voltage_to_adc, PressureModel};
