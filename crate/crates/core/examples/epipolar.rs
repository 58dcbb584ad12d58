//! Fits a fundamental matrix with RANSAC to a rectified pair of point sets
//! and scores the matches by point-to-epipolar-line residuals.
//!
//! cargo run --release --example epipolar

use pcwlad::eval::{ransac_model, score_matches, Correspondence, Model, ModelKind, RansacConfig, Truth, NCM_THRESHOLD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pcwlad::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pts: Vec<Correspondence> = (0..100)
        .map(|_| {
            let (x, y) = (rng.gen_range(0.0..640.0), rng.gen_range(0.0..480.0));
            let disparity = rng.gen_range(5.0..60.0);
            Correspondence { x1: x, y1: y, x2: x - disparity, y2: y + rng.gen_range(-0.3..0.3) }
        })
        .collect();
    for p in pts.iter_mut().step_by(7) {
        p.y2 += rng.gen_range(10.0..40.0);
    }

    let fit = ransac_model(&pts, ModelKind::Fundamental, &RansacConfig::default())?;
    let Model::Fundamental(f) = fit.model else { unreachable!() };
    println!("F = {:?}", f.rows());
    println!("{} inliers after {} trials", fit.inlier_count(), fit.trials);
    let r = score_matches(&pts, &Truth::Fundamental(f), NCM_THRESHOLD)?;
    println!("NCM {} / {}  CMR {:.3}  RMSE {:.3} px", r.ncm, r.total, r.cmr, r.rmse.unwrap_or(f64::NAN));
    Ok(())
}
