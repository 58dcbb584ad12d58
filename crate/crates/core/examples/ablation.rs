//! Sweeps similarity metric, window size and noise handling on a noisy
//! synthetic pair and prints the coarse correct-match rate of every cell.
//!
//! cargo run --release --example ablation -- [IMAGE] [--invert] [--noise SIGMA] [--features N] [--sizes 21,101]

use std::path::PathBuf;

use pcwlad::coarse::Metric;
use pcwlad::phase::NoiseMode;
use pcwlad::pipeline::{run_ablation, synthesize, synthetic_scene, PipelineConfig, Radiometric, SynthSpec};
use pcwlad::raster::{load_gray, AffinePair};

fn main() -> pcwlad::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let invert = args.iter().any(|a| a == "--invert");
    let flag = |name: &str| args.iter().position(|a| a == name).and_then(|i| args.get(i + 1));
    let noise = flag("--noise").map_or(0.05, |s| s.parse().expect("noise sigma"));
    let features = flag("--features").map_or(300, |s| s.parse().expect("feature count"));
    let sizes: Vec<usize> = flag("--sizes").map_or(vec![21, 41, 61, 81, 101], |s| {
        s.split(',').map(|v| v.parse().expect("window size")).collect()
    });
    let reference = match args.first().filter(|a| !a.starts_with("--")) {
        Some(p) => load_gray(&PathBuf::from(p))?,
        None => synthetic_scene(512, 512, 7),
    };
    let spec = SynthSpec {
        transform: AffinePair::translation(0.3, -0.7),
        radiometric: Radiometric { gamma: 1.4, gain: 0.8, offset: 0.05, invert },
        noise_sigma: noise,
        seed: 42,
    };
    let (target, truth) = synthesize(&reference, &spec)?;

    let mut cfg = PipelineConfig::default();
    cfg.features = features;
    let cells = run_ablation(
        &reference,
        &target,
        &truth.spec.transform,
        &Metric::ALL,
        &sizes,
        &[NoiseMode::Off, NoiseMode::Rayleigh],
        &cfg,
    )?;
    println!("metric size noise     CMR     RMSE    conv");
    for c in &cells {
        println!(
            "{:6} {:4} {:8} {:.4}  {:>7}  {:.3}",
            c.metric.to_string(),
            c.size,
            c.noise_mode.to_string(),
            c.cmr,
            c.rmse.map_or("n/a".into(), |v| format!("{v:.4}")),
            c.convergence_rate
        );
    }
    Ok(())
}
