//! Epoch loop with validation, plateau scheduling and best-checkpoint
//! retention.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{batch_gradient, forward, save_weights, CheckpointStats, ModelConfig, ModelWeights};
use crate::numerics::{Precision, Real, RngStream, Tensor};
use crate::preprocess::sync::{window, Segment, Window};
use crate::preprocess::PreparedDataset;
use crate::train::optim::{adamw_step, clip_grad_norm, AdamParams, OptimizerState};
use crate::train::schedule::{PlateauScheduler, SchedulerConfig};

pub const HISTORY_CSV: &str = "history.csv";
pub const HISTORY_JSON: &str = "history.json";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const RUN_MANIFEST: &str = "run.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch: usize,
    /// Must equal the split the dataset statistics were fitted with.
    pub split: f64,
    pub scheduler: SchedulerConfig,
    pub adam: AdamParams,
    pub seed: u64,
    /// Expected derivative flag of the dataset; `None` accepts either.
    pub with_derivatives: Option<bool>,
    /// Global gradient-norm clip; off when `None`.
    pub grad_clip: Option<f64>,
    /// Print a progress line to stderr every this many epochs (0: silent).
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 5e-4,
            weight_decay: 1e-3,
            epochs: 200,
            batch: 32,
            split: 0.8,
            scheduler: SchedulerConfig::default(),
            adam: AdamParams::default(),
            seed: 0,
            with_derivatives: None,
            grad_clip: None,
            log_every: 0,
        }
    }
}

impl TrainConfig {
    /// Small batches and a higher rate so a 64-wide model converges within
    /// a few minutes on one core.
    pub fn desk() -> TrainConfig {
        TrainConfig {
            lr: 1e-3,
            epochs: 50,
            batch: 8,
            ..TrainConfig::default()
        }
    }

    /// Named preset lookup: `full` (the defaults) or `desk`.
    pub fn preset(name: &str) -> Result<TrainConfig> {
        match name {
            "full" => Ok(TrainConfig::default()),
            "desk" => Ok(TrainConfig::desk()),
            other => Err(Error::Config(format!("unknown train preset {other:?} (expected full or desk)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config(format!("split {} not in (0, 1)", self.split)));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::Config("epochs and batch must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(Error::Config("grad_clip must be positive".into()));
            }
        }
        self.scheduler.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch with the lowest validation loss.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.epochs.get(self.best_epoch.checked_sub(1)?).map(|e| e.val_loss)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,lr,seconds\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:.3}\n",
                e.epoch, e.train_loss, e.val_loss, e.lr, e.seconds
            ));
        }
        out
    }
}

/// Windows entirely inside each segment's training portion and entirely
/// inside its validation portion. Windows crossing the split are dropped.
pub fn split_dataset(segments: &[Segment], windows: &[Window]) -> Result<(Vec<Window>, Vec<Window>)> {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for w in windows {
        let s = segments
            .get(w.segment)
            .ok_or_else(|| Error::Data(format!("window refers to missing segment {}", w.segment)))?;
        let r = w.range();
        if r.start >= s.start && r.end <= s.split {
            train.push(*w);
        } else if r.start >= s.split && r.end <= s.end {
            val.push(*w);
        }
    }
    if train.is_empty() || val.is_empty() {
        return Err(Error::Data(format!(
            "split leaves {} training and {} validation windows; recordings are too short",
            train.len(),
            val.len()
        )));
    }
    Ok((train, val))
}

/// Dataset frames converted once to the training precision, targets
/// z-scored with the artifact's target statistics.
pub struct WindowSource<T> {
    features: Vec<T>,
    targets: Vec<T>,
    in_width: usize,
    out_width: usize,
}

impl<T: Real> WindowSource<T> {
    pub fn new(dataset: &PreparedDataset) -> WindowSource<T> {
        let mut targets = dataset.skeleton.values().to_vec();
        dataset.header.target_stats.apply(&mut targets);
        WindowSource {
            features: dataset.features.values().iter().map(|v| T::of(*v)).collect(),
            targets: targets.into_iter().map(T::of).collect(),
            in_width: dataset.features.width(),
            out_width: dataset.skeleton.width(),
        }
    }

    pub fn batch(&self, windows: &[Window]) -> Result<(Tensor<T>, Tensor<T>)> {
        let len = windows.first().map_or(0, |w| w.len);
        let mut x = Vec::with_capacity(windows.len() * len * self.in_width);
        let mut y = Vec::with_capacity(windows.len() * len * self.out_width);
        for w in windows {
            if w.len != len {
                return Err(Error::Shape("windows in one batch must share a length".into()));
            }
            let r = w.range();
            x.extend_from_slice(&self.features[r.start * self.in_width..r.end * self.in_width]);
            y.extend_from_slice(&self.targets[r.start * self.out_width..r.end * self.out_width]);
        }
        Ok((
            Tensor::new(&[windows.len(), len, self.in_width], x)?,
            Tensor::new(&[windows.len(), len, self.out_width], y)?,
        ))
    }
}

/// Mean element-wise MSE of the eval-mode model over `windows`.
pub fn evaluate_loss<T: Real>(
    weights: &ModelWeights<T>,
    cfg: &ModelConfig,
    source: &WindowSource<T>,
    windows: &[Window],
    batch: usize,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    let rng = RngStream::new(0);
    for chunk in windows.chunks(batch.max(1)) {
        let (x, y) = source.batch(chunk)?;
        let p = forward(weights, cfg, &x, false, &rng)?;
        sum += p
            .data()
            .iter()
            .zip(y.data())
            .map(|(a, b)| (a.f64() - b.f64()).powi(2))
            .sum::<f64>();
        count += p.len();
    }
    Ok(sum / count.max(1) as f64)
}

/// One optimizer step on a batch; returns the batch loss.
#[allow(clippy::too_many_arguments)]
pub fn train_step<T: Real>(
    weights: &mut ModelWeights<T>,
    state: &mut OptimizerState<T>,
    cfg: &ModelConfig,
    inputs: &Tensor<T>,
    targets: &Tensor<T>,
    lr: f64,
    weight_decay: f64,
    grad_clip: Option<f64>,
    dropout_rng: Option<&RngStream>,
) -> Result<f64> {
    let mut g = batch_gradient(weights, cfg, inputs, targets, dropout_rng)?;
    if let Some(c) = grad_clip {
        clip_grad_norm(&mut g.grads, c);
    }
    adamw_step(weights, &g.grads, state, lr, weight_decay)?;
    Ok(g.loss)
}

#[derive(Debug, Clone)]
pub struct FitOutcome<T> {
    pub history: TrainHistory,
    pub best: ModelWeights<T>,
    pub last: ModelWeights<T>,
    pub stats: CheckpointStats,
    pub train_windows: Vec<Window>,
    pub val_windows: Vec<Window>,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    model: &'a ModelConfig,
    train: &'a TrainConfig,
    preprocess: &'a crate::preprocess::PreprocessConfig,
    artifact_config_hash: &'a str,
    raw_data_hash: &'a str,
    parameter_count: usize,
    train_windows: usize,
    val_windows: usize,
    split_policy: &'static str,
    best_epoch: usize,
    best_val_loss: Option<f64>,
    epochs_run: usize,
    total_seconds: f64,
    error: Option<String>,
}

/// Checks that the dataset, model and train configs describe the same run.
pub fn check_compatibility(dataset: &PreparedDataset, model: &ModelConfig, train: &TrainConfig) -> Result<()> {
    let h = &dataset.header;
    if model.input_width != h.feature_width {
        return Err(Error::Config(format!(
            "model input_width {} does not match dataset feature width {}",
            model.input_width, h.feature_width
        )));
    }
    if model.output_width != h.skeleton_width {
        return Err(Error::Config(format!(
            "model output_width {} does not match skeleton width {}",
            model.output_width, h.skeleton_width
        )));
    }
    if (train.split - h.config.split).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "train split {} differs from the split {} the dataset statistics were fitted on",
            train.split, h.config.split
        )));
    }
    if let Some(d) = train.with_derivatives {
        if d != h.with_derivatives {
            return Err(Error::Config(format!(
                "train config expects with_derivatives = {d}, dataset has {}",
                h.with_derivatives
            )));
        }
    }
    Ok(())
}

struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    fn write(&self, name: &str, contents: &[u8]) -> Result<()> {
        let p = self.dir.join(name);
        std::fs::write(&p, contents).map_err(|e| Error::io(&p, e))
    }

    fn history(&self, h: &TrainHistory) -> Result<()> {
        self.write(HISTORY_CSV, h.to_csv().as_bytes())?;
        let mut json = serde_json::to_string_pretty(h)?;
        json.push('\n');
        self.write(HISTORY_JSON, json.as_bytes())
    }
}

/// Trains a freshly initialized model on `dataset`.
///
/// Mini-batches are reshuffled every epoch from `seed`; dropout for batch
/// `b` of epoch `e` draws from its own stream, so a run is reproducible.
/// When `out_dir` is given the best checkpoint is rewritten on every
/// validation improvement, and history plus a run manifest are written at
/// the end, also when training aborts on a numeric error.
pub fn fit<T: Real>(
    dataset: &PreparedDataset,
    model: &ModelConfig,
    train: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<FitOutcome<T>> {
    model.validate()?;
    train.validate()?;
    check_compatibility(dataset, model, train)?;
    let all = window(&dataset.header.segments, model.window, dataset.header.config.stride)?;
    let (train_w, val_w) = split_dataset(&dataset.header.segments, &all)?;
    let source = WindowSource::<T>::new(dataset);
    let stats = CheckpointStats {
        feature_stats: dataset.header.feature_stats.clone(),
        target_stats: dataset.header.target_stats.clone(),
        preprocess: dataset.header.config.clone(),
    };
    let outputs = match out_dir {
        Some(d) => {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
            Some(Outputs { dir: d.to_path_buf() })
        }
        None => None,
    };

    let mut weights = ModelWeights::<T>::init(model)?;
    let mut state = OptimizerState::new(&weights, train.adam);
    let mut sched = PlateauScheduler::new(train.lr, train.scheduler);
    let mut history = TrainHistory::default();
    let mut best = weights.clone();
    let root = RngStream::new(train.seed);
    let started = Instant::now();

    let mut run_epochs = || -> Result<()> {
        for epoch in 1..=train.epochs {
            let t0 = Instant::now();
            let lr = sched.lr;
            let mut order = train_w.clone();
            root.fork(2 * epoch as u64).shuffle(&mut order);
            let drop_root = root.fork(2 * epoch as u64 + 1);
            let mut loss_sum = 0.0;
            for (b, chunk) in order.chunks(train.batch).enumerate() {
                let (x, y) = source.batch(chunk)?;
                let drng = drop_root.fork(b as u64);
                let l = train_step(&mut weights, &mut state, model, &x, &y, lr, train.weight_decay, train.grad_clip, Some(&drng))?;
                loss_sum += l * chunk.len() as f64;
            }
            let train_loss = loss_sum / order.len() as f64;
            let val_loss = evaluate_loss(&weights, model, &source, &val_w, train.batch)?;
            if !val_loss.is_finite() {
                return Err(Error::numeric(model.layers + 1, format!("validation loss is {val_loss} at epoch {epoch}")));
            }
            let rec = EpochRecord {
                epoch,
                train_loss,
                val_loss,
                lr,
                seconds: t0.elapsed().as_secs_f64(),
            };
            let improved = history.best_val_loss().is_none_or(|b| val_loss < b);
            history.epochs.push(rec);
            if improved {
                history.best_epoch = epoch;
                best = weights.clone();
                if let Some(o) = &outputs {
                    save_weights(o.dir.join(BEST_CHECKPOINT), &best, model, Some(&stats))?;
                }
            }
            sched.step(val_loss);
            if train.log_every > 0 && (epoch % train.log_every == 0 || epoch == train.epochs) {
                eprintln!(
                    "epoch {epoch:4}  train {train_loss:.6}  val {val_loss:.6}  lr {lr:.2e}  {:.1}s",
                    rec.seconds
                );
            }
        }
        Ok(())
    };
    let result = run_epochs();

    if let Some(o) = &outputs {
        o.history(&history)?;
        let manifest = RunManifest {
            model,
            train,
            preprocess: &dataset.header.config,
            artifact_config_hash: &dataset.header.config_hash,
            raw_data_hash: &dataset.header.raw_data_hash,
            parameter_count: weights.parameter_count(),
            train_windows: train_w.len(),
            val_windows: val_w.len(),
            split_policy: "chronological per recording; straddling windows dropped",
            best_epoch: history.best_epoch,
            best_val_loss: history.best_val_loss(),
            epochs_run: history.epochs.len(),
            total_seconds: started.elapsed().as_secs_f64(),
            error: result.as_ref().err().map(|e| e.to_string()),
        };
        let mut json = serde_json::to_string_pretty(&manifest)?;
        json.push('\n');
        o.write(RUN_MANIFEST, json.as_bytes())?;
    }
    result?;
    Ok(FitOutcome {
        history,
        best,
        last: weights,
        stats,
        train_windows: train_w,
        val_windows: val_w,
    })
}

/// History and checkpoint of a run, independent of its precision.
#[derive(Debug, Clone)]
pub struct FitSummary {
    pub history: TrainHistory,
    pub train_windows: usize,
    pub val_windows: usize,
}

/// [`fit`] at the precision named in the model config.
pub fn fit_with_precision(
    dataset: &PreparedDataset,
    model: &ModelConfig,
    train: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<FitSummary> {
    fn summary<T>(o: FitOutcome<T>) -> FitSummary {
        FitSummary {
            train_windows: o.train_windows.len(),
            val_windows: o.val_windows.len(),
            history: o.history,
        }
    }
    match model.precision {
        Precision::F32 => fit::<f32>(dataset, model, train, out_dir).map(summary),
        Precision::F64 => fit::<f64>(dataset, model, train, out_dir).map(summary),
    }
}
