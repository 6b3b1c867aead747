//! Training: MSE objective, AdamW, plateau schedule, chronological split
//! and the epoch loop.

pub mod fit;
pub mod optim;
pub mod schedule;

pub use fit::{
    check_compatibility, evaluate_loss, fit, fit_with_precision, split_dataset, train_step, EpochRecord, FitOutcome,
    FitSummary, TrainConfig, TrainHistory, WindowSource,
};
pub use optim::{adamw_step, clip_grad_norm, mse_loss, AdamParams, OptimizerState};
pub use schedule::{PlateauScheduler, SchedulerConfig};
