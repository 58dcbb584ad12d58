//! Template matching on phase congruency maps with each similarity metric,
//! for a pair shifted by a whole number of pixels.
//!
//! cargo run --release --example coarse_matching

use pcwlad::coarse::{coarse_match, Metric, TemplateSpec};
use pcwlad::detect::{detect_fast, FastConfig};
use pcwlad::phase::{compute_pc, PcParams};
use pcwlad::pipeline::{synthesize, synthetic_scene, SynthSpec};
use pcwlad::raster::AffinePair;

fn main() -> pcwlad::Result<()> {
    let (dx, dy) = (4.0, -3.0);
    let reference = synthetic_scene(320, 320, 5);
    let spec = SynthSpec { transform: AffinePair::translation(dx, dy), noise_sigma: 0.02, ..SynthSpec::default() };
    let (target, _) = synthesize(&reference, &spec)?;

    let pc_ref = compute_pc(&reference, &PcParams::default())?.pc;
    let pc_tgt = compute_pc(&target, &PcParams::default())?.pc;
    let fast = FastConfig { target_count: 200, ..FastConfig::default() };
    let kps = detect_fast(&pc_ref, &fast);

    for metric in Metric::ALL {
        let t = TemplateSpec { metric, ..TemplateSpec::default() };
        let (mut hits, mut total) = (0, 0);
        for kp in &kps {
            let Ok(m) = coarse_match(&pc_ref, &pc_tgt, kp, &t, (kp.x as i64, kp.y as i64)) else { continue };
            total += 1;
            if m.tgt_x - kp.x as i64 == dx as i64 && m.tgt_y - kp.y as i64 == dy as i64 {
                hits += 1;
            }
        }
        println!("{metric:5} exact integer shift for {hits} / {total} keypoints");
    }
    Ok(())
}
