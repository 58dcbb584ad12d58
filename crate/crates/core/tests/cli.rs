use std::path::Path;
use std::process::{Command, Output};

use pcwlad::pipeline::{synthetic_scene, TruthFile};
use pcwlad::raster::save_png16;

fn pcwlad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcwlad")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn scene_png(dir: &Path) -> String {
    let path = dir.join("scene.png");
    save_png16(&synthetic_scene(160, 160, 3), &path).unwrap();
    p(&path)
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&pcwlad(&["--help"])), 0);
    assert_eq!(code(&pcwlad(&["match", "--help"])), 0);
    assert_eq!(code(&pcwlad(&["frobnicate"])), 64);
    assert_eq!(code(&pcwlad(&["match", "--ref", "a.png"])), 64);
}

#[test]
fn missing_input_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = pcwlad(&["pc", "--input", &p(&dir.path().join("none.png")), "--out", &p(&dir.path().join("x.pcw"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn bad_parameter_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let img = scene_png(dir.path());
    let out = p(&dir.path().join("pc.pcw"));
    assert_eq!(code(&pcwlad(&["pc", "--input", &img, "--out", &out, "--n-scales", "0"])), 64);
    assert_eq!(code(&pcwlad(&["pc", "--input", &img, "--out", &out, "--noise-mode", "gaussian"])), 64);
}

#[test]
fn pc_writes_map_and_preview() {
    let dir = tempfile::tempdir().unwrap();
    let img = scene_png(dir.path());
    let out = dir.path().join("pc.pcw");
    let o = pcwlad(&["pc", "--input", &img, "--out", &p(&out), "--noise-mode", "rayleigh"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let pc = pcwlad::raster::load_pcw(&out).unwrap();
    assert_eq!((pc.width(), pc.height()), (160, 160));
    let (lo, hi) = pc.min_max();
    assert!(lo >= 0.0 && hi <= 1.0);
    assert!(out.with_extension("png").exists());
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let img = scene_png(dir.path());
    let cfg = dir.path().join("run.cfg");
    write(&cfg, "n-scales = 0\n");
    let out = p(&dir.path().join("pc.pcw"));
    let c = p(&cfg);
    assert_eq!(code(&pcwlad(&["pc", "--input", &img, "--out", &out, "--config", &c])), 64);
    assert_eq!(code(&pcwlad(&["pc", "--input", &img, "--out", &out, "--config", &c, "--n-scales", "3"])), 0);
}

#[test]
fn synth_writes_truth_echo() {
    let dir = tempfile::tempdir().unwrap();
    let img = scene_png(dir.path());
    let out = dir.path().join("pair");
    let o = pcwlad(&[
        "synth",
        "--input",
        &img,
        "--out",
        &p(&out),
        "--affine",
        "2.5,1.01,0.02,-1.5,-0.01,0.99",
        "--radiometric",
        "1.2,0.9,0.02,1",
        "--noise",
        "0.01",
        "--seed",
        "9",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let truth = TruthFile::load(&out.join("truth.json")).unwrap();
    assert_eq!(truth.spec.transform.coeffs(), [2.5, 1.01, 0.02, -1.5, -0.01, 0.99]);
    assert!(truth.spec.radiometric.invert);
    assert_eq!(truth.spec.seed, 9);
    for f in ["reference.pcw", "target.pcw", "target.png"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(code(&pcwlad(&["synth", "--input", &img, "--out", &p(&out), "--shift", "1"])), 64);
}

#[test]
fn ablate_rejects_empty_lists() {
    let o = pcwlad(&["ablate", "--ref", "missing.png", "--tgt", "missing.png", "--truth", "missing.json", "--metrics", ""]);
    assert_eq!(code(&o), 64);
}

const MATCHES: &str = "x1,y1,x2,y2\n0,5,0,5\n10,5,10,6\n20,5,20,6\n30,5,30,8\n";

#[test]
fn eval_against_points_and_transform() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    write(&m, MATCHES);
    let gt = dir.path().join("gt.csv");
    write(&gt, "x1,y1,x2,y2\n0,5,0,5\n10,5,10,5\n20,5,20,5\n30,5,30,5\n");
    let out = dir.path().join("e");
    let o = pcwlad(&["eval", "--matches", &p(&m), "--truth", &p(&gt), "--out", &p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["ncm"], 3);
    assert!((report["rmse"].as_f64().unwrap() - 0.8165).abs() < 1e-4);
    let residuals = std::fs::read_to_string(out.join("residuals.csv")).unwrap();
    assert_eq!(residuals.lines().count(), 5);

    let truth = dir.path().join("t.json");
    write(
        &truth,
        r#"{"schema":1,"width":40,"height":10,"transform":{"a0":0,"a1":1,"a2":0,"b0":0,"b1":0,"b2":1},"radiometric":{"gamma":1,"gain":1,"offset":0,"invert":false},"noise_sigma":0,"seed":1}"#,
    );
    let o = pcwlad(&["eval", "--matches", &p(&m), "--truth", &p(&truth), "--out", &p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("NCM 3 / 4"));
}

#[test]
fn eval_fundamental_needs_eight_matches() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    write(&m, MATCHES);
    let o = pcwlad(&["eval", "--matches", &p(&m), "--truth", "fundamental", "--out", &p(&dir.path().join("e"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn eval_rejects_malformed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    write(&m, "a,b\n1,2\n");
    let o = pcwlad(&["eval", "--matches", &p(&m), "--truth", "affine", "--out", &p(&dir.path().join("e"))]);
    assert_eq!(code(&o), 1);
}
