use pcwlad::coarse::Metric;
use pcwlad::fine::FineStatus;
use pcwlad::phase::{compute_pc, NoiseMode, PcParams};
use pcwlad::pipeline::{run_ablation, run_match, synthesize, synthetic_scene, write_match_outputs, PipelineConfig, SynthSpec};
use pcwlad::raster::AffinePair;

fn small_config() -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.features = 120;
    c
}

#[test]
fn identity_pair_converges_in_place() {
    let img = synthetic_scene(256, 256, 11);
    let run = run_match(&img, &img, &small_config()).unwrap();
    let conv: Vec<_> = run.converged().collect();
    assert!(conv.len() as f64 >= 0.95 * run.fine.len() as f64, "{} of {}", conv.len(), run.fine.len());
    for m in conv {
        assert_eq!(m.status, FineStatus::Converged);
        assert!((m.tgt_x - m.kp.x as f64).abs() < 0.05 && (m.tgt_y - m.kp.y as f64).abs() < 0.05);
    }
}

#[test]
fn rayleigh_mode_never_raises_pc() {
    let img = synthetic_scene(128, 128, 4);
    let off = compute_pc(&img, &PcParams::default()).unwrap().pc;
    let ray = compute_pc(&img, &PcParams { noise_mode: NoiseMode::Rayleigh, ..PcParams::default() }).unwrap().pc;
    for (a, b) in off.samples().iter().zip(ray.samples()) {
        assert!(*b <= *a + 1e-12, "{b} > {a}");
    }
}

#[test]
fn shifted_pair_recovers_translation() {
    let img = synthetic_scene(256, 256, 5);
    let spec = SynthSpec { transform: AffinePair::translation(2.4, -1.3), noise_sigma: 0.005, ..SynthSpec::default() };
    let (tgt, _) = synthesize(&img, &spec).unwrap();
    let run = run_match(&img, &tgt, &small_config()).unwrap();
    let inliers = run.inliers();
    assert!(inliers.len() > 10);
    for m in inliers {
        assert!((m.tgt_x - m.kp.x as f64 - 2.4).abs() < 0.25);
        assert!((m.tgt_y - m.kp.y as f64 + 1.3).abs() < 0.25);
    }
}

#[test]
fn outputs_are_written() {
    let img = synthetic_scene(200, 200, 8);
    let (tgt, _) = synthesize(&img, &SynthSpec { transform: AffinePair::translation(0.5, 0.5), ..SynthSpec::default() }).unwrap();
    let cfg = small_config();
    let run = run_match(&img, &tgt, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_match_outputs(dir.path(), &run, &cfg, None).unwrap();
    for f in ["coarse.csv", "fine.csv", "inliers.csv", "summary.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema"], 1);
}

#[test]
fn ablation_covers_every_cell() {
    let img = synthetic_scene(220, 220, 2);
    let t = AffinePair::translation(1.0, 0.0);
    let (tgt, _) = synthesize(&img, &SynthSpec { transform: t, ..SynthSpec::default() }).unwrap();
    let mut base = PipelineConfig::default();
    base.features = 40;
    let cells = run_ablation(&img, &tgt, &t, &[Metric::Ssd, Metric::Ssim], &[21, 41], &[NoiseMode::Off], &base).unwrap();
    assert_eq!(cells.len(), 4);
    for c in &cells {
        assert!((0.0..=1.0).contains(&c.cmr));
        assert!(c.coarse_total > 0);
    }
}
