//! Noisy raw recordings and their manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{write_insole_csv, write_mocap_csv, AmplifierParams};
use crate::numerics::RngStream;
use crate::preprocess::{DATASET_MANIFEST_FILE, LEFT_INSOLE_FILE, MOCAP_FILE, RIGHT_INSOLE_FILE};
use crate::synth::imu::imu_forward;
use crate::synth::kinematics::{sample_skeleton, Choreography, MotionTemplate};
use crate::synth::layout::TaxelLayout;
use crate::synth::pressure::{force_to_voltage, pressure_forward, PressureModel};
use crate::types::{
    FootSide, SensorSeries, SeriesMeta, SkeletonSeries, TaskLabel, TaskSpan, TimeSeries, FOOT_WIDTH, JOINT_COUNT,
    PRESSURE_CHANNELS, SKELETON_WIDTH,
};

pub const SYNTH_FORMAT: &str = "insole-pose-synth";
pub const SYNTH_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Per-taxel force noise, N.
    pub pressure_n: f64,
    pub gyro_rad_s: f64,
    pub accel_m_s2: f64,
    pub mocap_mm: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            pressure_n: 0.5,
            gyro_rad_s: 0.01,
            accel_m_s2: 0.05,
            mocap_mm: 0.3,
        }
    }
}

/// Start times of each stream on the common clock, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClockOffsets {
    pub left: f64,
    pub right: f64,
    pub mocap: f64,
}

impl Default for ClockOffsets {
    fn default() -> Self {
        ClockOffsets {
            left: 0.0,
            right: 0.002,
            mocap: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub tasks: Vec<TaskLabel>,
    pub duration_per_task_s: f64,
    pub seed: u64,
    pub mocap_rate_hz: f64,
    pub sensor_rate_hz: f64,
    pub noise: NoiseConfig,
    /// Chance that a joint's marker is missing in a mocap frame.
    pub missing_probability: f64,
    pub amplifier: AmplifierParams,
    pub pressure: PressureModel,
    pub squat_depth_mm: f64,
    /// Postural sway amplitude, mm.
    pub sway_mm: f64,
    pub offsets: ClockOffsets,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            tasks: TaskLabel::RECORDED.to_vec(),
            duration_per_task_s: 10.0,
            seed: 0,
            mocap_rate_hz: 120.0,
            sensor_rate_hz: 100.0,
            noise: NoiseConfig::default(),
            missing_probability: 0.0,
            amplifier: AmplifierParams::default(),
            pressure: PressureModel::default(),
            squat_depth_mm: 300.0,
            sway_mm: 2.0,
            offsets: ClockOffsets::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() || self.tasks.contains(&TaskLabel::Unknown) {
            return Err(Error::Config("synth tasks must be a non-empty list of known tasks".into()));
        }
        if !(self.duration_per_task_s >= 2.0) {
            return Err(Error::Config(format!(
                "duration_per_task_s must be at least 2, got {}",
                self.duration_per_task_s
            )));
        }
        if !(self.mocap_rate_hz > 0.0 && self.sensor_rate_hz > 0.0) {
            return Err(Error::Config("sample rates must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.missing_probability) {
            return Err(Error::Config(format!(
                "missing_probability {} not in [0, 1)",
                self.missing_probability
            )));
        }
        let n = self.noise;
        if [n.pressure_n, n.gyro_rad_s, n.accel_m_s2, n.mocap_mm, self.sway_mm].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("noise levels must be non-negative".into()));
        }
        if !(self.pressure.body_weight_n > 0.0 && self.pressure.full_scale_n > 0.0 && self.pressure.sigma > 0.0) {
            return Err(Error::Config("pressure model parameters must be positive".into()));
        }
        let o = self.offsets;
        if [o.left, o.right, o.mocap].iter().any(|v| !(*v >= 0.0 && *v < self.duration_per_task_s)) {
            return Err(Error::Config("clock offsets must lie in [0, duration_per_task_s)".into()));
        }
        self.amplifier.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn total_duration(&self) -> f64 {
        self.tasks.len() as f64 * self.duration_per_task_s
    }

    pub fn templates(&self) -> Vec<MotionTemplate> {
        self.tasks
            .iter()
            .map(|&t| {
                let mut m = MotionTemplate::default_for(t);
                if t == TaskLabel::Squat {
                    m.amplitude = self.squat_depth_mm;
                }
                m
            })
            .collect()
    }

    pub fn spans(&self) -> Vec<TaskSpan> {
        let d = self.duration_per_task_s;
        self.tasks
            .iter()
            .enumerate()
            .map(|(i, &task)| TaskSpan {
                task,
                start: i as f64 * d,
                end: (i + 1) as f64 * d,
            })
            .collect()
    }
}

/// Generated recordings before they are written out.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// 41-wide, pressure as sensor voltages.
    pub left: SensorSeries,
    pub right: SensorSeries,
    pub mocap: SkeletonSeries,
    /// Noise-free skeleton at the mocap timestamps.
    pub clean_mocap: SkeletonSeries,
    pub spans: Vec<TaskSpan>,
}

fn stream_times(offset: f64, rate: f64, end: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0u64;
    loop {
        // Rounded to the microsecond so written and parsed times agree.
        let t = ((offset + k as f64 / rate) * 1e6).round() / 1e6;
        if t >= end {
            return out;
        }
        out.push(t);
        k += 1;
    }
}

fn foot_series(
    cfg: &SynthConfig,
    choreo: &Choreography,
    layout: &TaxelLayout,
    side: FootSide,
    offset: f64,
    rng: &mut RngStream,
) -> Result<SensorSeries> {
    let times = stream_times(offset, cfg.sensor_rate_hz, cfg.total_duration());
    let skel = sample_skeleton(choreo, &times)?;
    let imu = imu_forward(&skel, side)?;
    let i = match side {
        FootSide::Left => 0,
        FootSide::Right => 1,
    };
    let n = cfg.noise;
    let mut values = Vec::with_capacity(times.len() * FOOT_WIDTH);
    for (f, &t) in times.iter().enumerate() {
        let forces = pressure_forward(choreo, t, layout, &cfg.pressure)[i];
        for force in forces {
            let noisy = force + n.pressure_n * rng.normal();
            values.push(force_to_voltage(noisy, &cfg.pressure, &cfg.amplifier)?);
        }
        let r = imu.frame(f);
        for (c, v) in r.iter().enumerate() {
            let sd = if c < 3 { n.gyro_rad_s } else { n.accel_m_s2 };
            values.push(v + sd * rng.normal());
        }
    }
    debug_assert_eq!(values.len(), times.len() * (PRESSURE_CHANNELS + 6));
    TimeSeries::new(
        times,
        FOOT_WIDTH,
        values,
        SeriesMeta {
            subject: Some("synthetic".into()),
            task: None,
            sample_rate: Some(cfg.sensor_rate_hz),
        },
    )
}

/// Generates every stream in memory.
pub fn synthesize(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let root = RngStream::new(cfg.seed);
    let choreo = Choreography::sequential(&cfg.templates(), cfg.duration_per_task_s, cfg.sway_mm, &root.fork(0));
    let layout = TaxelLayout::default();
    let left = foot_series(cfg, &choreo, &layout, FootSide::Left, cfg.offsets.left, &mut root.fork(1))?;
    let right = foot_series(cfg, &choreo, &layout, FootSide::Right, cfg.offsets.right, &mut root.fork(2))?;

    let times = stream_times(cfg.offsets.mocap, cfg.mocap_rate_hz, cfg.total_duration());
    let mut clean = sample_skeleton(&choreo, &times)?;
    clean.meta.sample_rate = Some(cfg.mocap_rate_hz);
    let mut mocap = clean.clone();
    let mut noise = root.fork(3);
    let mut missing = root.fork(4);
    for f in 0..mocap.len() {
        let row = mocap.frame_mut(f);
        for v in row.iter_mut() {
            *v += cfg.noise.mocap_mm * noise.normal();
        }
        if cfg.missing_probability > 0.0 {
            for j in 0..JOINT_COUNT {
                if missing.next_f64() < cfg.missing_probability {
                    row[j * 3..j * 3 + 3].fill(f64::NAN);
                }
            }
        }
    }
    debug_assert_eq!(mocap.width(), SKELETON_WIDTH);
    Ok(SynthOutput {
        left,
        right,
        mocap,
        clean_mocap: clean,
        spans: cfg.spans(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthFiles {
    pub left_insole: String,
    pub right_insole: String,
    pub mocap: String,
}

/// Contents of `dataset.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub format: String,
    pub version: u32,
    pub files: SynthFiles,
    pub seed: u64,
    pub sensor_rate_hz: f64,
    pub mocap_rate_hz: f64,
    pub offsets: ClockOffsets,
    pub frames: SynthFrameCounts,
    pub config: SynthConfig,
    pub segments: Vec<TaskSpan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthFrameCounts {
    pub left: usize,
    pub right: usize,
    pub mocap: usize,
}

/// Writes both insole files, the mocap file and `dataset.json` into `dir`.
pub fn emit_dataset(cfg: &SynthConfig, dir: impl AsRef<Path>) -> Result<SynthManifest> {
    let dir = dir.as_ref();
    let out = synthesize(cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_insole_csv(dir.join(LEFT_INSOLE_FILE), &out.left, &cfg.amplifier)?;
    write_insole_csv(dir.join(RIGHT_INSOLE_FILE), &out.right, &cfg.amplifier)?;
    write_mocap_csv(dir.join(MOCAP_FILE), &out.mocap)?;
    let manifest = SynthManifest {
        format: SYNTH_FORMAT.into(),
        version: SYNTH_VERSION,
        files: SynthFiles {
            left_insole: LEFT_INSOLE_FILE.into(),
            right_insole: RIGHT_INSOLE_FILE.into(),
            mocap: MOCAP_FILE.into(),
        },
        seed: cfg.seed,
        sensor_rate_hz: cfg.sensor_rate_hz,
        mocap_rate_hz: cfg.mocap_rate_hz,
        offsets: cfg.offsets,
        frames: SynthFrameCounts {
            left: out.left.len(),
            right: out.right.len(),
            mocap: out.mocap.len(),
        },
        config: cfg.clone(),
        segments: out.spans,
    };
    let path = dir.join(DATASET_MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
