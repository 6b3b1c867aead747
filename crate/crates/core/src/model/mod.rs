//! Transformer encoder regressor from feature windows to per-frame
//! skeletons, its weights, checkpoints and sliding-window inference.

pub mod checkpoint;
pub mod config;
pub mod encoder;
pub mod predict;
pub mod weights;

pub use checkpoint::{load_weights, save_weights, Checkpoint, CheckpointStats};
pub use config::ModelConfig;
pub use encoder::{attention_maps, batch_gradient, batch_loss, encode, forward, positional_encoding, BatchGradient};
pub use predict::{predict_series, predict_skeleton};
pub use weights::{param_specs, ModelWeights, ParamSpec};
