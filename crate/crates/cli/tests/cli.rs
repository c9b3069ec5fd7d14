use std::path::Path;
use std::process::{Command, Output};

fn rppg(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rppg")).args(args).current_dir(cwd).output().unwrap()
}

fn short_clip(dir: &Path, hr: f64) {
    let cfg = format!(r#"{{"hr_bpm": {hr}, "duration_s": 12.0, "seed": 4}}"#);
    std::fs::write(dir.join("synth.json"), cfg).unwrap();
    let out = rppg(
        &["synth", "--config", "synth.json", "--out", "c.trace.json", "--gt", "c.gt.json"],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_then_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    short_clip(dir.path(), 78.0);
    let out = rppg(
        &["estimate", "c.trace.json", "--gt", "c.gt.json", "--out", "r.json", "--plots", "plots"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    let hr = report["hr_bpm_estimate"].as_f64().unwrap();
    assert!((hr - 78.0).abs() <= 1.0, "{hr}");
    assert!(report["mae"].as_f64().unwrap() <= 1.0);
    for f in ["spectrum.svg", "motion.svg", "objective.svg"] {
        assert!(dir.path().join("plots").join(f).exists(), "{f}");
    }
}

#[test]
fn corrupt_trace_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.trace.json"), r#"{"version": 1, "fps": "fast"}"#).unwrap();
    let out = rppg(&["estimate", "bad.trace.json"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("fps"));
}

#[test]
fn fixed_weights_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    short_clip(dir.path(), 66.0);
    let out = rppg(&["estimate", "c.trace.json", "--fixed-weights", "1,0,0", "--out", "r.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["weights"], serde_json::json!([1.0, 0.0, 0.0]));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    short_clip(dir.path(), 70.0);
    std::fs::write(dir.path().join("p.json"), r#"{"method": "omit", "lambda": 2.0}"#).unwrap();
    let out = rppg(
        &["estimate", "c.trace.json", "--config", "p.json", "--lambda", "0.5", "--fixed-weights", "1,1,1", "--out", "r.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["method"], "omit");
    assert_eq!(report["config"]["lambda"], 0.5);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rppg(&["estimate", "x.trace.json", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ablate_prints_nine_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = rppg(&["synth", "--dir", "set", "--count", "2", "--preset", "motion", "--seed", "5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = rppg(&["ablate", "set", "--out", "abl.json", "--jobs", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let rows = text.lines().filter(|l| l.contains("SROI+BP") || l.contains("AGROI+")).count();
    assert_eq!(rows, 9, "{text}");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("abl.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 9);
}
