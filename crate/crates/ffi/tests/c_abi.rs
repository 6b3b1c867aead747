use std::ffi::{c_char, CString};
use std::path::Path;
use std::process::Command;

use insole_pose::model::{predict_series, predict_skeleton, save_weights, CheckpointStats, ModelConfig, ModelWeights};
use insole_pose::numerics::Precision;
use insole_pose::preprocess::{fit_stats, PreprocessConfig, TargetStats};
use insole_pose::types::{SeriesMeta, TimeSeries, SKELETON_WIDTH};
use insole_pose_ffi::*;

fn tiny(precision: Precision) -> ModelConfig {
    ModelConfig {
        d_model: 16,
        layers: 1,
        heads: 2,
        ff_dim: 32,
        window: 8,
        precision,
        seed: 5,
        ..ModelConfig::desk(82)
    }
}

fn series(frames: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> TimeSeries {
    let t = (0..frames).map(|k| k as f64 * 0.01).collect();
    let v = (0..frames * width).map(|i| f(i / width, i % width)).collect();
    TimeSeries::new(t, width, v, SeriesMeta::default()).unwrap()
}

fn write_checkpoint(dir: &Path, precision: Precision, with_stats: bool) -> (ModelConfig, CString, Option<CheckpointStats>) {
    let cfg = tiny(precision);
    let features = series(30, cfg.input_width, |f, c| ((f * 7 + c * 3) % 11) as f64 * 0.1);
    let skeleton = series(30, SKELETON_WIDTH, |f, c| 100.0 * c as f64 + f as f64);
    let stats = with_stats.then(|| CheckpointStats {
        feature_stats: fit_stats(&features).unwrap(),
        target_stats: TargetStats::fit(&skeleton, &[0..30]).unwrap(),
        preprocess: PreprocessConfig::default(),
    });
    let path = dir.join(format!("m_{precision:?}_{with_stats}.ckpt"));
    match precision {
        Precision::F32 => save_weights(&path, &ModelWeights::<f32>::init(&cfg).unwrap(), &cfg, stats.as_ref()).unwrap(),
        Precision::F64 => save_weights(&path, &ModelWeights::<f64>::init(&cfg).unwrap(), &cfg, stats.as_ref()).unwrap(),
    }
    (cfg, CString::new(path.to_str().unwrap()).unwrap(), stats)
}

fn load(path: &CString) -> *mut IpModel {
    let mut m = std::ptr::null_mut();
    assert_eq!(unsafe { ip_model_load(path.as_ptr(), &mut m) }, IpStatus::Ok);
    assert!(!m.is_null());
    m
}

#[test]
fn predictions_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    for precision in [Precision::F32, Precision::F64] {
        let (cfg, path, stats) = write_checkpoint(dir.path(), precision, true);
        let m = load(&path);
        let (mut w_in, mut w_out, mut win) = (0, 0, 0);
        unsafe {
            assert_eq!(ip_model_input_width(m, &mut w_in), IpStatus::Ok);
            assert_eq!(ip_model_output_width(m, &mut w_out), IpStatus::Ok);
            assert_eq!(ip_model_window(m, &mut win), IpStatus::Ok);
        }
        assert_eq!((w_in, w_out, win), (82, SKELETON_WIDTH, 8));

        let frames = 20;
        let x = series(frames, 82, |f, c| (f as f64 * 0.3 + c as f64).sin());
        let mut out = vec![0.0; frames * w_out];
        let mut raw = vec![0.0; frames * w_out];
        unsafe {
            assert_eq!(ip_model_predict(m, x.values().as_ptr(), frames, out.as_mut_ptr(), out.len()), IpStatus::Ok);
            assert_eq!(ip_model_predict_raw(m, x.values().as_ptr(), frames, raw.as_mut_ptr(), raw.len()), IpStatus::Ok);
        }
        let ck = insole_pose::model::load_weights::<f64>(path.to_str().unwrap()).unwrap();
        let expect = match precision {
            Precision::F32 => {
                let c = insole_pose::model::load_weights::<f32>(path.to_str().unwrap()).unwrap();
                (
                    predict_skeleton(&c.weights, &cfg, &x, &stats.as_ref().unwrap().target_stats).unwrap(),
                    predict_series(&c.weights, &cfg, &x).unwrap(),
                )
            }
            Precision::F64 => (
                predict_skeleton(&ck.weights, &cfg, &x, &stats.as_ref().unwrap().target_stats).unwrap(),
                predict_series(&ck.weights, &cfg, &x).unwrap(),
            ),
        };
        assert_eq!(out, expect.0.values());
        assert_eq!(raw, expect.1.values());

        let mut short = vec![0.0; 4 * w_out];
        let st = unsafe { ip_model_predict(m, x.values().as_ptr(), 4, short.as_mut_ptr(), short.len()) };
        assert_eq!(st, IpStatus::Incompatible);
        let st = unsafe { ip_model_predict(m, x.values().as_ptr(), frames, out.as_mut_ptr(), out.len() - 1) };
        assert_eq!(st, IpStatus::InvalidArgument);
        unsafe { ip_model_free(m) };
    }
}

#[test]
fn missing_stats_and_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let (_, path, _) = write_checkpoint(dir.path(), Precision::F64, false);
    let m = load(&path);
    let x = vec![0.0; 10 * 82];
    let mut out = vec![0.0; 10 * SKELETON_WIDTH];
    let st = unsafe { ip_model_predict(m, x.as_ptr(), 10, out.as_mut_ptr(), out.len()) };
    assert_eq!(st, IpStatus::Incompatible);
    let st = unsafe { ip_model_predict_raw(m, x.as_ptr(), 10, out.as_mut_ptr(), out.len()) };
    assert_eq!(st, IpStatus::Ok);
    unsafe { ip_model_free(m) };

    let mut m = std::ptr::null_mut();
    let missing = CString::new(dir.path().join("none.ckpt").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ip_model_load(missing.as_ptr(), &mut m) }, IpStatus::Io);
    assert!(m.is_null());
    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    let junk = CString::new(junk.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ip_model_load(junk.as_ptr(), &mut m) }, IpStatus::Format);
    let mut buf = [0 as c_char; 128];
    let n = unsafe { ip_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
}

#[test]
fn header_is_current_and_compiles() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(root.join("include/insole_pose.h")).unwrap();
    for sym in [
        "ip_model_load",
        "ip_model_free",
        "ip_model_input_width",
        "ip_model_output_width",
        "ip_model_window",
        "ip_model_predict",
        "ip_model_predict_raw",
        "ip_amplifier_gain",
        "ip_adc_to_voltage",
        "ip_eval_rmse",
        "ip_last_error_message",
        "IP_STATUS_PANIC = 7",
        "typedef struct IpModel IpModel",
    ] {
        assert!(header.contains(sym), "{sym}");
    }
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(cc.status.success());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"insole_pose.h\"\nint main(void) { double g; return ip_amplifier_gain(1.0, 1.0, &g) == IP_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
        .arg(root.join("include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}
