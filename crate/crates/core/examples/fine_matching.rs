//! Refines a single coarse match to sub-pixel accuracy under a small affine
//! distortion and a gain/offset change, printing the recovered parameters.
//!
//! cargo run --release --example fine_matching

use pcwlad::coarse::{coarse_match, TemplateSpec};
use pcwlad::detect::{detect_fast, FastConfig};
use pcwlad::fine::{refine, FineConfig};
use pcwlad::phase::{compute_pc, PcParams};
use pcwlad::pipeline::{synthesize, synthetic_scene, Radiometric, SynthSpec};
use pcwlad::raster::AffinePair;

fn main() -> pcwlad::Result<()> {
    let truth = AffinePair { a0: 1.35, a1: 1.01, a2: 0.01, b0: -0.6, b1: -0.01, b2: 0.99 };
    let reference = synthetic_scene(256, 256, 3);
    let spec = SynthSpec {
        transform: truth,
        radiometric: Radiometric { gain: 0.7, offset: 0.1, ..Radiometric::default() },
        noise_sigma: 0.005,
        seed: 1,
    };
    let (target, _) = synthesize(&reference, &spec)?;
    let pc_ref = compute_pc(&reference, &PcParams::default())?.pc;
    let pc_tgt = compute_pc(&target, &PcParams::default())?.pc;

    let margin = FastConfig::margin_for_windows(101, 81) + 10;
    let kps = detect_fast(&pc_ref, &FastConfig { target_count: 20, margin, ..FastConfig::default() });
    let cfg = FineConfig::default();
    for kp in kps.iter().take(5) {
        let Ok(c) = coarse_match(&pc_ref, &pc_tgt, kp, &TemplateSpec::default(), (kp.x as i64, kp.y as i64)) else { continue };
        let Ok(f) = refine(&c, &pc_ref, &pc_tgt, &cfg) else { continue };
        let (tx, ty) = truth.apply(kp.x as f64, kp.y as f64);
        println!(
            "kp ({:3},{:3}) coarse ({},{}) fine ({:.3},{:.3}) true ({:.3},{:.3}) {:?} after {} iterations, SSIM {:.3} -> {:.3}",
            kp.x, kp.y, c.tgt_x, c.tgt_y, f.tgt_x, f.tgt_y, tx, ty, f.status, f.iterations, f.initial_ssim, f.final_ssim
        );
        println!("    params {:?}", f.params);
    }
    Ok(())
}
