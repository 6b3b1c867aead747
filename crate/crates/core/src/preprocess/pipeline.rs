//! The full preprocessing chain from raw CSV files to a [`PreparedDataset`].
//!
//! Sensors: merge feet, zero-fill, moving average, resample.
//! Skeleton: gap interpolation, zero-phase low-pass, resample.
//! Then: synchronize, label, segment, fit statistics on the training
//! portion, normalize/standardize, derivative features.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::digest::{json_hash, BlobHasher};
use crate::error::{Error, Result};
use crate::ingest::{
    merge_feet, read_imu_csv, read_insole_csv, read_mocap_csv, substitute_imu, AmplifierParams, IngestReport,
    ParseMode,
};
use crate::preprocess::artifacts::{feature_layout, ArtifactHeader, PreparedDataset, ARTIFACT_FORMAT, ARTIFACT_VERSION};
use crate::preprocess::features::{build_features, fit_stats_on, normalize_standardize, ChannelStats, TargetStats};
use crate::preprocess::filters::{interpolate_gaps, lowpass, moving_average, resample, zero_fill};
use crate::preprocess::sync::{segments_from_labels, synchronize, train_ranges, SyncedDataset};
use crate::types::{label_at, FootSide, SensorSeries, SkeletonSeries, TaskSpan, TimeSeries, JOINT_COUNT};

pub const LEFT_INSOLE_FILE: &str = "left_insole.csv";
pub const RIGHT_INSOLE_FILE: &str = "right_insole.csv";
pub const LEFT_IMU_FILE: &str = "left_imu.csv";
pub const RIGHT_IMU_FILE: &str = "right_imu.csv";
pub const MOCAP_FILE: &str = "mocap.csv";
pub const DATASET_MANIFEST_FILE: &str = "dataset.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Target grid period in seconds.
    pub period: f64,
    /// Moving-average window for sensor channels, in source frames.
    pub moving_average_window: usize,
    /// Low-pass cutoff applied to the skeleton.
    pub lowpass_cutoff_hz: f64,
    /// Longest mocap gap that is interpolated, in source frames.
    pub max_gap_frames: usize,
    pub with_derivatives: bool,
    pub window: usize,
    pub stride: usize,
    /// Fraction of every segment used for training statistics.
    pub split: f64,
    pub pair_tolerance_s: f64,
    /// Subtract the Hips position from every joint.
    pub root_relative: bool,
    pub parse_mode: ParseMode,
    pub amplifier: AmplifierParams,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            period: 0.01,
            moving_average_window: 5,
            lowpass_cutoff_hz: 6.0,
            max_gap_frames: 30,
            with_derivatives: true,
            window: 100,
            stride: 25,
            split: 0.8,
            pair_tolerance_s: crate::ingest::DEFAULT_PAIR_TOLERANCE,
            root_relative: false,
            parse_mode: ParseMode::Lenient,
            amplifier: AmplifierParams::default(),
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) {
            return Err(Error::Config(format!("period must be positive, got {}", self.period)));
        }
        if self.moving_average_window == 0 || self.moving_average_window % 2 == 0 {
            return Err(Error::Config("moving_average_window must be odd".into()));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config(format!("split {} not in (0, 1)", self.split)));
        }
        if self.window == 0 || self.stride == 0 {
            return Err(Error::Config("window and stride must be positive".into()));
        }
        self.amplifier.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn feature_width(&self) -> usize {
        if self.with_derivatives {
            3 * crate::types::FRAME_WIDTH
        } else {
            crate::types::FRAME_WIDTH
        }
    }
}

/// Parsed raw recordings of one session.
#[derive(Debug, Clone)]
pub struct RawInputs {
    pub left: SensorSeries,
    pub right: SensorSeries,
    pub left_imu: Option<SensorSeries>,
    pub right_imu: Option<SensorSeries>,
    pub mocap: Option<SkeletonSeries>,
    pub spans: Vec<TaskSpan>,
    pub reports: Vec<IngestReport>,
    /// Digest over the raw file bytes.
    pub raw_hash: String,
}

#[derive(Deserialize)]
struct SpansOnly {
    #[serde(default)]
    segments: Vec<TaskSpan>,
}

/// Paths of the sensor-side input files.
#[derive(Debug, Clone)]
pub struct SensorPaths {
    pub left: PathBuf,
    pub right: PathBuf,
    pub left_imu: Option<PathBuf>,
    pub right_imu: Option<PathBuf>,
}

impl SensorPaths {
    /// Standard file names inside `dir`; IMU files only when present.
    pub fn in_dir(dir: &Path) -> SensorPaths {
        let opt = |n: &str| Some(dir.join(n)).filter(|p| p.exists());
        SensorPaths {
            left: dir.join(LEFT_INSOLE_FILE),
            right: dir.join(RIGHT_INSOLE_FILE),
            left_imu: opt(LEFT_IMU_FILE),
            right_imu: opt(RIGHT_IMU_FILE),
        }
    }
}

fn hash_file(h: &mut BlobHasher, path: &Path) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    h.add(&name, &bytes);
    Ok(())
}

/// Reads the sensor files only.
pub fn load_sensors(paths: &SensorPaths, cfg: &PreprocessConfig) -> Result<RawInputs> {
    let mut hasher = BlobHasher::default();
    let mut reports = Vec::new();
    let (left, r) = read_insole_csv(&paths.left, FootSide::Left, &cfg.amplifier, cfg.parse_mode)?;
    reports.push(r);
    hash_file(&mut hasher, &paths.left)?;
    let (right, r) = read_insole_csv(&paths.right, FootSide::Right, &cfg.amplifier, cfg.parse_mode)?;
    reports.push(r);
    hash_file(&mut hasher, &paths.right)?;
    let mut imu = |p: &Option<PathBuf>, side: FootSide| -> Result<Option<SensorSeries>> {
        let Some(p) = p else { return Ok(None) };
        let (s, mut r) = read_imu_csv(p, cfg.parse_mode)?;
        r.side = Some(side);
        reports.push(r);
        hash_file(&mut hasher, p)?;
        Ok(Some(s))
    };
    let left_imu = imu(&paths.left_imu, FootSide::Left)?;
    let right_imu = imu(&paths.right_imu, FootSide::Right)?;
    Ok(RawInputs {
        left,
        right,
        left_imu,
        right_imu,
        mocap: None,
        spans: Vec::new(),
        reports,
        raw_hash: hasher.finish(),
    })
}

/// Reads a raw session directory: both insoles, optional IMU files, the
/// mocap export and, when present, the dataset manifest's task spans.
pub fn load_raw_dir(dir: impl AsRef<Path>, cfg: &PreprocessConfig) -> Result<RawInputs> {
    let dir = dir.as_ref();
    let paths = SensorPaths::in_dir(dir);
    let mut raw = load_sensors(&paths, cfg)?;
    let mut hasher = BlobHasher::default();
    hasher.add("sensors", raw.raw_hash.as_bytes());
    let mocap_path = dir.join(MOCAP_FILE);
    let (mocap, r) = read_mocap_csv(&mocap_path, cfg.parse_mode)?;
    raw.reports.push(r);
    hash_file(&mut hasher, &mocap_path)?;
    let manifest = dir.join(DATASET_MANIFEST_FILE);
    if manifest.exists() {
        let text = std::fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
        let spans: SpansOnly =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", manifest.display())))?;
        raw.spans = spans.segments;
        hasher.add("spans", &serde_json::to_vec(&raw.spans)?);
    }
    raw.mocap = Some(mocap);
    raw.raw_hash = hasher.finish();
    Ok(raw)
}

/// Merged 82-wide sensor frames on the grid.
pub fn prepare_sensors(raw: &RawInputs, cfg: &PreprocessConfig) -> Result<SensorSeries> {
    let foot = |s: &SensorSeries, imu: &Option<SensorSeries>| match imu {
        Some(i) => substitute_imu(s, i, cfg.pair_tolerance_s),
        None => Ok(s.clone()),
    };
    let left = foot(&raw.left, &raw.left_imu).map_err(|e| e.in_stage("merge"))?;
    let right = foot(&raw.right, &raw.right_imu).map_err(|e| e.in_stage("merge"))?;
    let (merged, _) = merge_feet(&left, &right, cfg.pair_tolerance_s).map_err(|e| e.in_stage("merge"))?;
    let filled = zero_fill(&merged);
    let smooth = moving_average(&filled, cfg.moving_average_window).map_err(|e| e.in_stage("smooth"))?;
    resample(&smooth, cfg.period).map_err(|e| e.in_stage("resample"))
}

/// Gap-free, low-passed skeleton on the grid (longest gap-free segment).
pub fn prepare_skeleton(mocap: &SkeletonSeries, cfg: &PreprocessConfig) -> Result<SkeletonSeries> {
    let segments = interpolate_gaps(mocap, cfg.max_gap_frames).map_err(|e| e.in_stage("gaps"))?;
    let longest = segments
        .into_iter()
        .max_by_key(|s| s.len())
        .expect("interpolate_gaps returns at least one segment");
    let (t0, t1) = (longest.first_time().unwrap(), longest.last_time().unwrap());
    if longest.len() < 2 || t1 <= t0 {
        return Err(Error::Data("mocap segment too short to filter".into()).in_stage("lowpass"));
    }
    let rate = (longest.len() - 1) as f64 / (t1 - t0);
    let filtered = lowpass(&longest, cfg.lowpass_cutoff_hz, rate).map_err(|e| e.in_stage("lowpass"))?;
    resample(&filtered, cfg.period).map_err(|e| e.in_stage("resample"))
}

/// Standardized (and optionally differentiated) features with given stats.
pub fn featurize(sensors: &SensorSeries, stats: &ChannelStats, cfg: &PreprocessConfig) -> Result<TimeSeries> {
    let z = normalize_standardize(sensors, stats).map_err(|e| e.in_stage("standardize"))?;
    build_features(&z, cfg.with_derivatives, cfg.period).map_err(|e| e.in_stage("derivatives"))
}

fn make_root_relative(skeleton: &SkeletonSeries) -> SkeletonSeries {
    let mut out = skeleton.clone();
    for i in 0..out.len() {
        let f = out.frame_mut(i);
        let hips = [f[0], f[1], f[2]];
        for j in 0..JOINT_COUNT {
            for a in 0..3 {
                f[3 * j + a] -= hips[a];
            }
        }
    }
    out
}

/// Output of [`run`]: the dataset to persist plus the synchronized,
/// unnormalized intermediate for inspection.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub dataset: PreparedDataset,
    pub synced: SyncedDataset,
}

/// Runs every stage on parsed inputs. Errors carry the stage name.
pub fn run(raw: &RawInputs, cfg: &PreprocessConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let mocap = raw
        .mocap
        .as_ref()
        .ok_or_else(|| Error::Data("no mocap series supplied".into()).in_stage("ingest"))?;
    let sensors = prepare_sensors(raw, cfg)?;
    let skeleton = prepare_skeleton(mocap, cfg)?;
    let mut synced = synchronize(&sensors, &skeleton, cfg.period).map_err(|e| e.in_stage("sync"))?;
    synced.labels = synced.sensors.timestamps().iter().map(|&t| label_at(&raw.spans, t)).collect();

    let segments = segments_from_labels(&synced.labels, cfg.split).map_err(|e| e.in_stage("segment"))?;
    let train = train_ranges(&segments);
    let stats = fit_stats_on(&synced.sensors, &train).map_err(|e| e.in_stage("stats"))?;
    synced.stats = Some(stats.clone());
    let features = featurize(&synced.sensors, &stats, cfg)?;

    let targets = if cfg.root_relative {
        make_root_relative(&synced.skeleton)
    } else {
        synced.skeleton.clone()
    };
    let target_stats = TargetStats::fit(&targets, &train).map_err(|e| e.in_stage("stats"))?;

    let header = ArtifactHeader {
        format: ARTIFACT_FORMAT.into(),
        version: ARTIFACT_VERSION,
        frames: features.len(),
        feature_width: features.width(),
        skeleton_width: targets.width(),
        grid_period: cfg.period,
        grid_start_index: synced.grid_start_index(),
        with_derivatives: cfg.with_derivatives,
        root_relative: cfg.root_relative,
        channel_layout: feature_layout(cfg.with_derivatives),
        feature_stats: stats,
        target_stats,
        segments,
        config: cfg.clone(),
        config_hash: json_hash(cfg)?,
        raw_data_hash: raw.raw_hash.clone(),
    };
    // Series metadata is not persisted; drop it so a reloaded dataset
    // compares equal to the in-memory one.
    let mut features = features;
    let mut targets = targets;
    features.meta = Default::default();
    targets.meta = Default::default();
    let dataset = PreparedDataset {
        header,
        features,
        skeleton: targets,
    };
    dataset.validate()?;
    Ok(PipelineOutput { dataset, synced })
}
