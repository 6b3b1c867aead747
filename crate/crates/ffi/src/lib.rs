//! C ABI for insole-pose.
//!
//! Models are opaque [`IpModel`] handles from [`ip_model_load`], released
//! with [`ip_model_free`]. Every function returns an [`IpStatus`]; on
//! failure the message is available from [`ip_last_error_message`] on the
//! same thread. Frames are row-major `f64` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use insole_pose::eval::{joint_errors, summarize};
use insole_pose::ingest::{adc_to_sensor_voltage, amplifier_gain, AmplifierParams};
use insole_pose::model::{load_weights, predict_series, predict_skeleton, Checkpoint, ModelConfig};
use insole_pose::numerics::Precision;
use insole_pose::types::{SeriesMeta, TimeSeries, SKELETON_WIDTH};
use insole_pose::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Incompatible = 5,
    Numeric = 6,
    Panic = 7,
}

enum Weights {
    F32(Checkpoint<f32>),
    F64(Checkpoint<f64>),
}

/// A loaded checkpoint.
pub struct IpModel {
    inner: Weights,
}

impl IpModel {
    fn config(&self) -> &ModelConfig {
        match &self.inner {
            Weights::F32(c) => &c.config,
            Weights::F64(c) => &c.config,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(IpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let status = match e.root() {
            Error::Io { .. } => IpStatus::Io,
            Error::Parameter(_) => IpStatus::InvalidArgument,
            Error::Shape(_) | Error::Data(_) | Error::Alignment(_) | Error::Config(_) => IpStatus::Incompatible,
            Error::Numeric { .. } => IpStatus::Numeric,
            _ => IpStatus::Format,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            IpStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(IpStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(IpStatus::InvalidArgument, msg.into())
}

unsafe fn model_ref<'a>(model: *const IpModel) -> Result<&'a IpModel, Failure> {
    model.as_ref().ok_or_else(|| null("model"))
}

unsafe fn out_ref<'a, T>(out: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    out.as_mut().ok_or_else(|| null(what))
}

unsafe fn input<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

fn series(values: &[f64], frames: usize, width: usize) -> Result<TimeSeries, Failure> {
    let times = (0..frames).map(|k| k as f64 * 0.01).collect();
    Ok(TimeSeries::new(times, width, values.to_vec(), SeriesMeta::default())?)
}

/// Loads a checkpoint file. On success `*out` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ip_model_load(path: *const c_char, out: *mut *mut IpModel) -> IpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| invalid("path is not UTF-8"))?;
        let path = Path::new(path);
        let probe = load_weights::<f32>(path)?;
        let inner = match probe.config.precision {
            Precision::F32 => Weights::F32(probe),
            Precision::F64 => Weights::F64(load_weights::<f64>(path)?),
        };
        *out = Box::into_raw(Box::new(IpModel { inner }));
        Ok(())
    })
}

/// Releases a handle from [`ip_model_load`]. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ip_model_free(model: *mut IpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of feature channels per input frame.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ip_model_input_width(model: *const IpModel, out: *mut usize) -> IpStatus {
    guard(|| {
        let m = model_ref(model)?;
        *out_ref(out, "out")? = m.config().input_width;
        Ok(())
    })
}

/// Number of values per output frame.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ip_model_output_width(model: *const IpModel, out: *mut usize) -> IpStatus {
    guard(|| {
        let m = model_ref(model)?;
        *out_ref(out, "out")? = m.config().output_width;
        Ok(())
    })
}

/// Window length in frames; inputs must hold at least this many frames.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ip_model_window(model: *const IpModel, out: *mut usize) -> IpStatus {
    guard(|| {
        let m = model_ref(model)?;
        *out_ref(out, "out")? = m.config().window;
        Ok(())
    })
}

unsafe fn run_predict(
    model: *const IpModel,
    features: *const f64,
    frames: usize,
    out: *mut f64,
    out_len: usize,
    denormalize: bool,
) -> Result<(), Failure> {
    let m = model_ref(model)?;
    let cfg = m.config();
    let n_in = frames.checked_mul(cfg.input_width).ok_or_else(|| invalid("frame count overflows"))?;
    let n_out = frames * cfg.output_width;
    if out_len != n_out {
        return Err(invalid(format!("output buffer holds {out_len} values, need {n_out}")));
    }
    let x = series(input(features, n_in, "features")?, frames, cfg.input_width)?;
    let dst = output(out, out_len, "out")?;
    let pred = match &m.inner {
        Weights::F32(c) => predict_with(c, &x, denormalize)?,
        Weights::F64(c) => predict_with(c, &x, denormalize)?,
    };
    dst.copy_from_slice(pred.values());
    Ok(())
}

fn predict_with<T: insole_pose::numerics::Real>(
    c: &Checkpoint<T>,
    x: &TimeSeries,
    denormalize: bool,
) -> Result<TimeSeries, Failure> {
    if !denormalize {
        return Ok(predict_series(&c.weights, &c.config, x)?);
    }
    let stats = c
        .stats
        .as_ref()
        .ok_or_else(|| Failure(IpStatus::Incompatible, "checkpoint carries no target statistics".into()))?;
    Ok(predict_skeleton(&c.weights, &c.config, x, &stats.target_stats)?)
}

/// Predicts skeleton frames in millimetres from `frames` normalized
/// feature frames. `out_len` must equal `frames * output_width`.
///
/// # Safety
/// `features` must point to `frames * input_width` values and `out` to
/// `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn ip_model_predict(
    model: *const IpModel,
    features: *const f64,
    frames: usize,
    out: *mut f64,
    out_len: usize,
) -> IpStatus {
    guard(|| run_predict(model, features, frames, out, out_len, true))
}

/// As [`ip_model_predict`] but returns the model's normalized outputs.
///
/// # Safety
/// Same as [`ip_model_predict`].
#[no_mangle]
pub unsafe extern "C" fn ip_model_predict_raw(
    model: *const IpModel,
    features: *const f64,
    frames: usize,
    out: *mut f64,
    out_len: usize,
) -> IpStatus {
    guard(|| run_predict(model, features, frames, out, out_len, false))
}

/// Gain of the non-inverting amplifier, `1 + r2 / r1`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ip_amplifier_gain(r1_ohms: f64, r2_ohms: f64, out: *mut f64) -> IpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let params = AmplifierParams {
            r1_ohms,
            r2_ohms,
            ..AmplifierParams::default()
        };
        *out = amplifier_gain(&params)?;
        Ok(())
    })
}

/// Sensor-side voltage for an ADC count.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ip_adc_to_voltage(
    count: i64,
    r1_ohms: f64,
    r2_ohms: f64,
    supply_volts: f64,
    adc_bits: u32,
    out: *mut f64,
) -> IpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let params = AmplifierParams {
            r1_ohms,
            r2_ohms,
            supply_volts,
            adc_bits,
        };
        *out = adc_to_sensor_voltage(count, &params)
            .map_err(|e| Failure(IpStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// RMSE in millimetres of per-joint Euclidean errors between two skeleton
/// sequences of `frames` rows of 63 values.
///
/// # Safety
/// `pred` and `truth` must each point to `frames * 63` values.
#[no_mangle]
pub unsafe extern "C" fn ip_eval_rmse(pred: *const f64, truth: *const f64, frames: usize, out: *mut f64) -> IpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if frames == 0 {
            return Err(invalid("no frames"));
        }
        let n = frames * SKELETON_WIDTH;
        let p = series(input(pred, n, "pred")?, frames, SKELETON_WIDTH)?;
        let t = series(input(truth, n, "truth")?, frames, SKELETON_WIDTH)?;
        let e = joint_errors(&p, &t)?;
        *out = summarize(e.data())?.rmse;
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`) and returns the full message
/// length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ip_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}
