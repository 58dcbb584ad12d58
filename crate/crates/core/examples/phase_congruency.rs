//! Computes phase congruency with and without noise compensation, detects
//! FAST corners on the result and writes 16-bit previews.
//!
//! cargo run --release --example phase_congruency -- [IMAGE] [OUT_DIR]

use std::path::PathBuf;

use pcwlad::detect::{detect_fast, FastConfig};
use pcwlad::phase::{compute_pc, NoiseMode, PcParams};
use pcwlad::raster::{load_gray, save_png16};
use pcwlad::pipeline::synthetic_scene;

fn main() -> pcwlad::Result<()> {
    let mut args = std::env::args().skip(1);
    let img = match args.next() {
        Some(p) => load_gray(PathBuf::from(p))?,
        None => synthetic_scene(256, 256, 1),
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| "pc_out".into()));
    std::fs::create_dir_all(&out).map_err(|e| pcwlad::Error::Format(e.to_string()))?;

    for mode in [NoiseMode::Off, NoiseMode::Rayleigh] {
        let params = PcParams { noise_mode: mode, ..PcParams::default() };
        let pc = compute_pc(&img, &params)?.pc;
        let (lo, hi) = pc.min_max();
        let mean = pc.samples().iter().sum::<f64>() / pc.samples().len() as f64;
        let kps = detect_fast(&pc, &FastConfig::default());
        println!("{mode:9} range [{lo:.4}, {hi:.4}] mean {mean:.4} corners {}", kps.len());
        save_png16(&pc, out.join(format!("pc_{mode}.png")))?;
    }
    println!("previews in {}", out.display());
    Ok(())
}
