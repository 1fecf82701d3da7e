use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use delaysync::capture::{read_capture, write_capture, CaptureHeader};
use delaysync::synth::static_scenario;
use num_complex::Complex64;

fn delaysync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delaysync"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn synth_inspect_sound_report() {
    let dir = tempfile::tempdir().unwrap();
    let cap = dir.path().join("s.csi");
    let out = delaysync(&["synth", "--preset", "static", "--seed", "3", "--frames", "25", "--out", p(&cap)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = delaysync(&["inspect", p(&cap), "--frames", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("25 frames"));

    let sound_dir = dir.path().join("sound");
    let out = delaysync(&["sound", p(&cap), "--out-dir", p(&sound_dir), "--ma", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&sound_dir);
    assert_eq!(s["config"]["kappa"], 8);
    assert_eq!(s["config"]["ma_window"], 5);
    assert_eq!(s["counts"]["frames_calibrated"], 25);
    assert!(sound_dir.join("ir_series.bin").exists());
    let cal = fs::read_to_string(sound_dir.join("calibration.csv")).unwrap();
    assert_eq!(cal.lines().count(), 26);

    let rep_dir = dir.path().join("report");
    let out = delaysync(&["report", p(&cap), "--out-dir", p(&rep_dir), "--max-delay-ns", "400"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(rep_dir.join("ir_series.csv")).unwrap();
    assert!(csv.starts_with("frame,delay_ns,mag_db,phase_rad\n"));
    let png = fs::read(rep_dir.join("heatmap.png")).unwrap();
    assert_eq!(&png[1..4], b"PNG");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cap = dir.path().join("s.csi");
    assert!(delaysync(&["synth", "--preset", "static", "--frames", "12", "--out", p(&cap)]).status.success());
    let cfg = dir.path().join("opts.json");
    fs::write(&cfg, r#"{"kappa": 2, "ma_window": 3, "window": "rectangular"}"#).unwrap();
    let out_dir = dir.path().join("o");
    let out = delaysync(&["sound", p(&cap), "--config", p(&cfg), "--kappa", "4", "--out-dir", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out_dir);
    assert_eq!(s["config"]["kappa"], 4);
    assert_eq!(s["config"]["ma_window"], 3);
    assert_eq!(s["config"]["window"], "rectangular");
    assert_eq!(s["config"]["first_peak_threshold_db"], -15.0);
}

#[test]
fn synth_from_scenario_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = static_scenario();
    cfg.frame_count = 7;
    cfg.name = "bench".into();
    let scen = dir.path().join("scenario.json");
    fs::write(&scen, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let cap = dir.path().join("b.csi");
    let truth = dir.path().join("truth.jsonl");
    let out = delaysync(&["synth", "--scenario", p(&scen), "--seed", "9", "--out", p(&cap), "--truth", p(&truth)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let c = read_capture(&cap).unwrap();
    assert_eq!(c.frames.len(), 7);
    assert_eq!(c.header.metadata["scenario"], "bench");
    assert_eq!(fs::read_to_string(&truth).unwrap().lines().count(), 7);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csi");
    assert_eq!(delaysync(&["sound", p(&missing)]).status.code(), Some(2));
    let junk = dir.path().join("junk.csi");
    fs::write(&junk, b"not a capture").unwrap();
    assert_eq!(delaysync(&["inspect", p(&junk)]).status.code(), Some(2));
    assert_eq!(delaysync(&["sound", p(&junk), "--window", "hann"]).status.code(), Some(2));
    assert_eq!(delaysync(&["synth", "--preset", "nowhere", "--out", p(&junk)]).status.code(), Some(2));
}

#[test]
fn silent_capture_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = static_scenario();
    cfg.frame_count = 5;
    let frames: Vec<_> = delaysync::synth::generate_capture(&cfg, 1)
        .unwrap()
        .map(|(mut f, _)| {
            for c in &mut f.chains {
                c.csi.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            }
            f
        })
        .collect();
    let cap = dir.path().join("silent.csi");
    write_capture(&cap, &CaptureHeader::new(cfg.layout.clone(), cfg.params.clone(), 2), &frames).unwrap();
    let out_dir = dir.path().join("o");
    let out = delaysync(&["sound", p(&cap), "--out-dir", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
