//! Gap handling, smoothing, resampling to the common grid, statistics,
//! derivative features, synchronization, segmentation and persistence.

pub mod artifacts;
pub mod features;
pub mod filters;
pub mod pipeline;
pub mod sync;

pub use artifacts::{ArtifactHeader, PreparedDataset};
pub use features::{
    build_features, derivatives, fit_stats, fit_stats_on, normalize, normalize_standardize, ChannelStats, TargetStats,
};
pub use filters::{interpolate_gaps, is_on_grid, lowpass, moving_average, resample, zero_fill, Biquad};
pub use pipeline::{
    DATASET_MANIFEST_FILE, LEFT_IMU_FILE, LEFT_INSOLE_FILE, MOCAP_FILE, RIGHT_IMU_FILE, RIGHT_INSOLE_FILE,
    featurize, load_raw_dir, load_sensors, run, PipelineOutput, PreprocessConfig, RawInputs, SensorPaths};
pub use sync::{segments_from_labels, split_point, synchronize, train_ranges, window, Segment, SyncedDataset, Window};
