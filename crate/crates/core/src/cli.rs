//! The `insole-pose` command line: one binary, one subcommand per stage.
//!
//! Every command reads an optional TOML config with the sections
//! `[synth]`, `[preprocess]`, `[model]`, `[train]` and `[ablation]`;
//! flags override config values. `[model]` and `[train]` accept a
//! `preset = "desk" | "full"` key whose values the other keys override.
//! Relative output directories are placed under `$INSOLE_POSE_OUT_ROOT`
//! when it is set.
//!
//! Exit codes: 0 ok, 1 other failure, 2 config, 3 I/O, 4 preprocess,
//! 5 compatibility, 6 guard.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::digest::json_hash;
use crate::error::Error;
use crate::eval::{ablation_compare, evaluate_validation, write_report, Evaluation};
use crate::ingest::write_mocap_csv;
use crate::model::{load_weights, predict_skeleton, Checkpoint, ModelConfig};
use crate::numerics::{Precision, Real};
use crate::preprocess::pipeline::prepare_sensors;
use crate::preprocess::{featurize, load_raw_dir, load_sensors, run, PreparedDataset, PreprocessConfig, SensorPaths};
use crate::synth::{emit_dataset, SynthConfig};
use crate::train::{check_compatibility, fit, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_PREPROCESS: i32 = 4;
pub const EXIT_COMPATIBILITY: i32 = 5;
pub const EXIT_GUARD: i32 = 6;

pub const OUT_ROOT_ENV: &str = "INSOLE_POSE_OUT_ROOT";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PREDICTION_FILE: &str = "predicted_skeleton.csv";
pub const ABLATION_CSV: &str = "ablation.csv";
pub const ABLATION_SVG: &str = "ablation.svg";
pub const ABLATION_JSON: &str = "ablation.json";
pub const REPORT_DIR: &str = "report";

/// A command failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

type CliResult<T> = std::result::Result<T, CliError>;

fn fail(code: i32, message: impl Into<String>) -> CliError {
    CliError {
        code,
        message: message.into(),
    }
}

/// Wraps a library error; I/O problems always map to [`EXIT_IO`].
fn with_code(code: i32) -> impl Fn(Error) -> CliError {
    move |e: Error| {
        let c = if matches!(e.root(), Error::Io { .. }) { EXIT_IO } else { code };
        fail(c, e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "insole-pose", version, about = "Insole pressure and IMU to 3D skeleton regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic raw dataset.
    Synth(SynthArgs),
    /// Turn a raw session directory into training artifacts.
    Preprocess(PreprocessArgs),
    /// Train a model on artifacts.
    Train(TrainArgs),
    /// Score a checkpoint on the validation part of artifacts.
    Eval(EvalArgs),
    /// Train and compare models on artifacts with and without derivatives.
    Ablate(AblateArgs),
    /// Predict skeletons from insole recordings.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    F32,
    F64,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Precision {
        match p {
            PrecisionArg::F32 => Precision::F32,
            PrecisionArg::F64 => Precision::F64,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seconds per task.
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Raw session directory (insole CSVs, mocap CSV, optional manifest).
    #[arg(long)]
    pub raw: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub derivatives: Option<OnOff>,
}

/// Model and training overrides shared by `train` and `ablate`.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainOverrides {
    /// Model preset, `desk` or `full`.
    #[arg(long)]
    pub preset: Option<String>,
    /// Training preset, `desk` or `full`.
    #[arg(long)]
    pub train_preset: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub precision: Option<PrecisionArg>,
    /// Suppress per-epoch progress lines.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub artifacts: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub artifacts: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Default, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Artifacts preprocessed with derivative features.
    #[arg(long = "with")]
    pub with_derivatives: PathBuf,
    /// Artifacts preprocessed without derivative features.
    #[arg(long = "without")]
    pub without_derivatives: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Directory holding the standard insole (and optional IMU) files.
    #[arg(long, conflicts_with_all = ["left", "right"])]
    pub raw: Option<PathBuf>,
    #[arg(long, requires = "right")]
    pub left: Option<PathBuf>,
    #[arg(long, requires = "left")]
    pub right: Option<PathBuf>,
    #[arg(long)]
    pub left_imu: Option<PathBuf>,
    #[arg(long)]
    pub right_imu: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// `[model]` / `[train]`: an optional preset plus field overrides.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct PresetSection {
    pub preset: Option<String>,
    #[serde(flatten)]
    pub fields: toml::Table,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    /// Training seed of the first arm; defaults to the train seed.
    pub seed_a: Option<u64>,
    pub seed_b: Option<u64>,
    pub label_a: Option<String>,
    pub label_b: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub synth: Option<SynthConfig>,
    pub preprocess: Option<PreprocessConfig>,
    pub model: Option<PresetSection>,
    pub train: Option<PresetSection>,
    pub ablation: Option<AblationSection>,
}

/// Reads a TOML config; parse errors carry line and column.
pub fn load_config(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(EXIT_CONFIG, format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| {
        let at = e
            .span()
            .map(|s| {
                let (line, col) = line_col(&text, s.start);
                format!(" at line {line}, column {col}")
            })
            .unwrap_or_default();
        fail(EXIT_CONFIG, format!("config {}{at}: {}", path.display(), e.message()))
    })
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn overlay<T: Serialize + for<'de> Deserialize<'de>>(base: &T, fields: &toml::Table, section: &str) -> CliResult<T> {
    let mut table = toml::Table::try_from(base).map_err(|e| fail(EXIT_CONFIG, format!("[{section}]: {e}")))?;
    merge(&mut table, fields);
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| fail(EXIT_CONFIG, format!("[{section}]: {}", e.message())))
}

/// Resolved model config for artifacts of `input_width` features.
pub fn resolve_model(file: &FileConfig, o: &TrainOverrides, input_width: usize) -> CliResult<ModelConfig> {
    let section = file.model.clone().unwrap_or_default();
    let preset = o.preset.clone().or(section.preset).unwrap_or_else(|| "desk".into());
    let base = ModelConfig::preset(&preset, input_width).map_err(with_code(EXIT_CONFIG))?;
    let mut cfg = overlay(&base, &section.fields, "model")?;
    if cfg.input_width != input_width {
        return Err(fail(
            EXIT_COMPATIBILITY,
            format!("model input_width {} does not match the artifacts' feature width {input_width}", cfg.input_width),
        ));
    }
    if let Some(p) = o.precision {
        cfg.precision = p.into();
    }
    cfg.validate().map_err(with_code(EXIT_CONFIG))?;
    Ok(cfg)
}

pub fn resolve_train(file: &FileConfig, o: &TrainOverrides) -> CliResult<TrainConfig> {
    let section = file.train.clone().unwrap_or_default();
    let preset = o.train_preset.clone().or(section.preset).unwrap_or_else(|| "desk".into());
    let base = TrainConfig::preset(&preset).map_err(with_code(EXIT_CONFIG))?;
    let mut cfg = overlay(&base, &section.fields, "train")?;
    if let Some(v) = o.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = o.batch {
        cfg.batch = v;
    }
    if let Some(v) = o.lr {
        cfg.lr = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if !o.quiet && cfg.log_every == 0 {
        cfg.log_every = 1;
    }
    cfg.validate().map_err(with_code(EXIT_CONFIG))?;
    Ok(cfg)
}

/// `out` under `$INSOLE_POSE_OUT_ROOT` when relative and the variable is set.
pub fn resolve_out(out: &Path) -> PathBuf {
    match std::env::var_os(OUT_ROOT_ENV) {
        Some(root) if out.is_relative() && !root.is_empty() => PathBuf::from(root).join(out),
        _ => out.to_path_buf(),
    }
}

/// Record of one command invocation, written as `manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub wall_seconds: f64,
}

struct ManifestBuilder {
    command: &'static str,
    started: Instant,
    inputs: BTreeMap<String, String>,
    seeds: BTreeMap<String, u64>,
    outputs: Vec<String>,
}

impl ManifestBuilder {
    fn new(command: &'static str) -> Self {
        ManifestBuilder {
            command,
            started: Instant::now(),
            inputs: BTreeMap::new(),
            seeds: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    fn input(&mut self, name: &str, path: &Path) {
        self.inputs.insert(name.into(), path.display().to_string());
    }

    fn seed(&mut self, name: &str, seed: u64) {
        self.seeds.insert(name.into(), seed);
    }

    fn output(&mut self, name: &str) {
        self.outputs.push(name.into());
    }

    fn write<C: Serialize>(self, dir: &Path, config: &C) -> CliResult<RunManifest> {
        let config = serde_json::to_value(config).map_err(|e| fail(EXIT_FAILURE, e.to_string()))?;
        let config_hash = json_hash(&config).map_err(with_code(EXIT_FAILURE))?;
        let mut outputs = self.outputs;
        outputs.push(MANIFEST_FILE.into());
        let m = RunManifest {
            command: self.command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config,
            config_hash,
            inputs: self.inputs,
            outputs,
            seeds: self.seeds,
            wall_seconds: self.started.elapsed().as_secs_f64(),
        };
        let mut json = serde_json::to_string_pretty(&m).map_err(|e| fail(EXIT_FAILURE, e.to_string()))?;
        json.push('\n');
        let p = dir.join(MANIFEST_FILE);
        std::fs::write(&p, json).map_err(|e| fail(EXIT_IO, format!("cannot write {}: {e}", p.display())))?;
        Ok(m)
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| fail(EXIT_IO, format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| fail(EXIT_IO, format!("cannot write {}: {e}", path.display())))
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<RunManifest> {
    let mut m = ManifestBuilder::new("synth");
    let file = load_config(args.config.as_deref())?;
    let mut cfg = file.synth.unwrap_or_default();
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(d) = args.duration {
        cfg.duration_per_task_s = d;
    }
    cfg.validate().map_err(with_code(EXIT_CONFIG))?;
    let out = resolve_out(&args.out);
    let manifest = emit_dataset(&cfg, &out).map_err(with_code(EXIT_FAILURE))?;
    if let Some(c) = &args.config {
        m.input("config", c);
    }
    m.seed("synth", cfg.seed);
    for f in [&manifest.files.left_insole, &manifest.files.right_insole, &manifest.files.mocap] {
        m.output(f);
    }
    m.output(crate::preprocess::DATASET_MANIFEST_FILE);
    m.write(&out, &cfg)
}

pub fn cmd_preprocess(args: &PreprocessArgs) -> CliResult<RunManifest> {
    let mut m = ManifestBuilder::new("preprocess");
    let file = load_config(args.config.as_deref())?;
    let mut cfg = file.preprocess.unwrap_or_default();
    if let Some(d) = args.derivatives {
        cfg.with_derivatives = d == OnOff::On;
    }
    cfg.validate().map_err(with_code(EXIT_CONFIG))?;
    let raw = load_raw_dir(&args.raw, &cfg).map_err(with_code(EXIT_PREPROCESS))?;
    let output = run(&raw, &cfg).map_err(with_code(EXIT_PREPROCESS))?;
    let out = resolve_out(&args.out);
    output.dataset.save(&out).map_err(with_code(EXIT_FAILURE))?;
    m.input("raw", &args.raw);
    for f in [
        crate::preprocess::artifacts::HEADER_FILE,
        crate::preprocess::artifacts::FEATURES_FILE,
        crate::preprocess::artifacts::SKELETON_FILE,
    ] {
        m.output(f);
    }
    m.write(&out, &cfg)
}

/// Loads artifacts; anything but a missing file is a compatibility error.
fn warn_skipped(ev: &Evaluation, window: usize) {
    if ev.skipped_segments > 0 {
        eprintln!(
            "warning: {} segment(s) skipped, validation range shorter than the {window}-frame window",
            ev.skipped_segments
        );
    }
}

fn load_artifacts(dir: &Path) -> CliResult<PreparedDataset> {
    PreparedDataset::load(dir).map_err(|e| {
        let code = if matches!(e.root(), Error::Io { .. }) { EXIT_IO } else { EXIT_COMPATIBILITY };
        fail(code, format!("artifacts {}: {e}", dir.display()))
    })
}

#[derive(Serialize)]
struct TrainResolved<'a> {
    model: &'a ModelConfig,
    train: &'a TrainConfig,
}

struct ArmResult {
    evaluation: Evaluation,
    best_epoch: usize,
}

fn train_and_eval<T: Real>(ds: &PreparedDataset, model: &ModelConfig, train: &TrainConfig, out: &Path) -> CliResult<ArmResult> {
    let outcome = fit::<T>(ds, model, train, Some(out)).map_err(with_code(EXIT_FAILURE))?;
    let evaluation = evaluate_validation(&outcome.best, model, ds).map_err(with_code(EXIT_FAILURE))?;
    warn_skipped(&evaluation, model.window);
    write_report(out.join(REPORT_DIR), &evaluation.report).map_err(with_code(EXIT_FAILURE))?;
    Ok(ArmResult {
        evaluation,
        best_epoch: outcome.history.best_epoch,
    })
}

fn train_arm(ds: &PreparedDataset, model: &ModelConfig, train: &TrainConfig, out: &Path) -> CliResult<ArmResult> {
    check_compatibility(ds, model, train).map_err(with_code(EXIT_COMPATIBILITY))?;
    match model.precision {
        Precision::F32 => train_and_eval::<f32>(ds, model, train, out),
        Precision::F64 => train_and_eval::<f64>(ds, model, train, out),
    }
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<RunManifest> {
    let mut m = ManifestBuilder::new("train");
    let file = load_config(args.config.as_deref())?;
    let ds = load_artifacts(&args.artifacts)?;
    let model = resolve_model(&file, &args.overrides, ds.header.feature_width)?;
    let train = resolve_train(&file, &args.overrides)?;
    let out = resolve_out(&args.out);
    create_dir(&out)?;
    let arm = train_arm(&ds, &model, &train, &out)?;
    if !args.overrides.quiet {
        eprintln!(
            "best epoch {}: validation RMSE {:.1} mm",
            arm.best_epoch, arm.evaluation.report.overall.rmse
        );
    }
    m.input("artifacts", &args.artifacts);
    if let Some(c) = &args.config {
        m.input("config", c);
    }
    m.seed("train", train.seed);
    m.seed("model", model.seed);
    for f in [
        crate::train::fit::BEST_CHECKPOINT,
        crate::train::fit::HISTORY_CSV,
        crate::train::fit::HISTORY_JSON,
        crate::train::fit::RUN_MANIFEST,
        REPORT_DIR,
    ] {
        m.output(f);
    }
    m.write(
        &out,
        &TrainResolved {
            model: &model,
            train: &train,
        },
    )
}

fn load_checkpoint<T: Real>(path: &Path) -> CliResult<Checkpoint<T>> {
    load_weights::<T>(path).map_err(|e| {
        let code = if matches!(e.root(), Error::Io { .. }) { EXIT_IO } else { EXIT_COMPATIBILITY };
        fail(code, format!("checkpoint {}: {e}", path.display()))
    })
}

/// The precision a checkpoint was trained at.
fn checkpoint_precision(path: &Path) -> CliResult<Precision> {
    Ok(load_checkpoint::<f32>(path)?.config.precision)
}

fn eval_at<T: Real>(path: &Path, ds: &PreparedDataset) -> CliResult<(ModelConfig, Evaluation)> {
    let ck = load_checkpoint::<T>(path)?;
    let h = &ds.header;
    if ck.config.input_width != h.feature_width {
        return Err(fail(
            EXIT_COMPATIBILITY,
            format!(
                "checkpoint expects {} input features, artifacts have {}",
                ck.config.input_width, h.feature_width
            ),
        ));
    }
    if let Some(stats) = &ck.stats {
        if stats.feature_stats != h.feature_stats || stats.target_stats != h.target_stats {
            return Err(fail(
                EXIT_COMPATIBILITY,
                "checkpoint statistics differ from the artifacts' statistics",
            ));
        }
    }
    let ev = evaluate_validation(&ck.weights, &ck.config, ds).map_err(with_code(EXIT_COMPATIBILITY))?;
    warn_skipped(&ev, ck.config.window);
    Ok((ck.config, ev))
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<RunManifest> {
    let mut m = ManifestBuilder::new("eval");
    let ds = load_artifacts(&args.artifacts)?;
    let (model, ev) = match checkpoint_precision(&args.checkpoint)? {
        Precision::F32 => eval_at::<f32>(&args.checkpoint, &ds)?,
        Precision::F64 => eval_at::<f64>(&args.checkpoint, &ds)?,
    };
    let out = resolve_out(&args.out);
    write_report(&out, &ev.report).map_err(with_code(EXIT_FAILURE))?;
    m.input("checkpoint", &args.checkpoint);
    m.input("artifacts", &args.artifacts);
    for f in [
        crate::eval::report::TASK_TABLE_FILE,
        crate::eval::report::PART_TABLE_FILE,
        crate::eval::report::REPORT_JSON_FILE,
        crate::eval::report::TASK_CHART_FILE,
        crate::eval::report::PART_CHART_FILE,
    ] {
        m.output(f);
    }
    m.write(&out, &model)
}

#[derive(Serialize)]
struct AblateResolved<'a> {
    model_a: &'a ModelConfig,
    model_b: &'a ModelConfig,
    train_a: &'a TrainConfig,
    train_b: &'a TrainConfig,
    ablation: &'a AblationSection,
}

/// Arm A trains on the artifacts without derivatives, arm B on those with;
/// deltas are B − A.
pub fn cmd_ablate(args: &AblateArgs) -> CliResult<RunManifest> {
    let mut m = ManifestBuilder::new("ablate");
    let file = load_config(args.config.as_deref())?;
    let without = load_artifacts(&args.without_derivatives)?;
    let with = load_artifacts(&args.with_derivatives)?;
    if without.header.raw_data_hash != with.header.raw_data_hash {
        return Err(fail(
            EXIT_GUARD,
            format!(
                "artifact sets come from different raw data ({} vs {})",
                without.header.raw_data_hash, with.header.raw_data_hash
            ),
        ));
    }
    let ab = file.ablation.clone().unwrap_or_default();
    let train = resolve_train(&file, &args.overrides)?;
    let seed_a = ab.seed_a.unwrap_or(train.seed);
    let seed_b = ab.seed_b.unwrap_or(train.seed);
    if seed_a != seed_b {
        return Err(fail(
            EXIT_GUARD,
            format!("arms must share one seed for a fair comparison, got {seed_a} and {seed_b}"),
        ));
    }
    let train = TrainConfig { seed: seed_a, ..train };
    let model_a = resolve_model(&file, &args.overrides, without.header.feature_width)?;
    let model_b = resolve_model(&file, &args.overrides, with.header.feature_width)?;
    let out = resolve_out(&args.out);
    let (dir_a, dir_b) = (out.join("a"), out.join("b"));
    create_dir(&dir_a)?;
    create_dir(&dir_b)?;
    let train_a = TrainConfig {
        with_derivatives: Some(without.header.with_derivatives),
        ..train.clone()
    };
    let train_b = TrainConfig {
        with_derivatives: Some(with.header.with_derivatives),
        ..train.clone()
    };
    let a = train_arm(&without, &model_a, &train_a, &dir_a)?;
    let b = train_arm(&with, &model_b, &train_b, &dir_b)?;
    let label_a = ab.label_a.clone().unwrap_or_else(|| "Without derivatives".into());
    let label_b = ab.label_b.clone().unwrap_or_else(|| "With derivatives".into());
    let cmp = ablation_compare(&a.evaluation.report.tasks, &b.evaluation.report.tasks, &label_a, &label_b)
        .map_err(with_code(EXIT_FAILURE))?;
    write_text(&out.join(ABLATION_CSV), &cmp.to_csv())?;
    write_text(&out.join(ABLATION_SVG), &cmp.to_svg())?;
    let mut json = serde_json::to_string_pretty(&cmp).map_err(|e| fail(EXIT_FAILURE, e.to_string()))?;
    json.push('\n');
    write_text(&out.join(ABLATION_JSON), &json)?;
    m.input("with", &args.with_derivatives);
    m.input("without", &args.without_derivatives);
    m.seed("seed_a", seed_a);
    m.seed("seed_b", seed_b);
    for f in [ABLATION_CSV, ABLATION_SVG, ABLATION_JSON, "a", "b"] {
        m.output(f);
    }
    m.write(
        &out,
        &AblateResolved {
            model_a: &model_a,
            model_b: &model_b,
            train_a: &train_a,
            train_b: &train_b,
            ablation: &ab,
        },
    )
}

fn predict_at<T: Real>(args: &PredictArgs, out: &Path) -> CliResult<(ModelConfig, usize)> {
    let ck = load_checkpoint::<T>(&args.checkpoint)?;
    let stats = ck.stats.as_ref().ok_or_else(|| {
        fail(
            EXIT_COMPATIBILITY,
            format!("checkpoint {} carries no preprocessing statistics", args.checkpoint.display()),
        )
    })?;
    let cfg = &stats.preprocess;
    let paths = match (&args.raw, &args.left, &args.right) {
        (Some(dir), _, _) => SensorPaths::in_dir(dir),
        (None, Some(l), Some(r)) => SensorPaths {
            left: l.clone(),
            right: r.clone(),
            left_imu: args.left_imu.clone(),
            right_imu: args.right_imu.clone(),
        },
        _ => return Err(fail(EXIT_CONFIG, "give --raw or both --left and --right")),
    };
    let raw = load_sensors(&paths, cfg).map_err(with_code(EXIT_PREPROCESS))?;
    let sensors = prepare_sensors(&raw, cfg).map_err(with_code(EXIT_PREPROCESS))?;
    let features = featurize(&sensors, &stats.feature_stats, cfg).map_err(with_code(EXIT_PREPROCESS))?;
    if features.width() != ck.config.input_width {
        return Err(fail(
            EXIT_COMPATIBILITY,
            format!("features have width {}, checkpoint expects {}", features.width(), ck.config.input_width),
        ));
    }
    let pred = predict_skeleton(&ck.weights, &ck.config, &features, &stats.target_stats).map_err(with_code(EXIT_FAILURE))?;
    create_dir(out)?;
    write_mocap_csv(out.join(PREDICTION_FILE), &pred).map_err(with_code(EXIT_FAILURE))?;
    Ok((ck.config, pred.len()))
}

pub fn cmd_predict(args: &PredictArgs) -> CliResult<RunManifest> {
    let mut m = ManifestBuilder::new("predict");
    let out = resolve_out(&args.out);
    let (model, _) = match checkpoint_precision(&args.checkpoint)? {
        Precision::F32 => predict_at::<f32>(args, &out)?,
        Precision::F64 => predict_at::<f64>(args, &out)?,
    };
    m.input("checkpoint", &args.checkpoint);
    for (name, p) in [("raw", &args.raw), ("left", &args.left), ("right", &args.right)] {
        if let Some(p) = p {
            m.input(name, p);
        }
    }
    m.output(PREDICTION_FILE);
    m.write(&out, &model)
}

pub fn dispatch(cli: &Cli) -> CliResult<RunManifest> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Preprocess(a) => cmd_preprocess(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Predict(a) => cmd_predict(a),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Usage errors exit with [`EXIT_CONFIG`].
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    match dispatch(&cli) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
