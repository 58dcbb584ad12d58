//! Least absolute deviations by reweighted least squares against ordinary
//! least squares on a line fit with gross outliers.
//!
//! cargo run --release --example wlad_regression

use pcwlad::fine::{weighted_least_squares, wlad_solve, Row, WladOptions, N_PARAMS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pcwlad::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth: Row = std::array::from_fn(|k| 0.5 - 0.1 * k as f64);
    let mut rows = Vec::new();
    let mut obs = Vec::new();
    for k in 0..200 {
        let r: Row = std::array::from_fn(|j| if j == 0 { 1.0 } else { rng.gen_range(-1.0..1.0) });
        let mut l: f64 = r.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + rng.gen_range(-0.01..0.01);
        if k % 10 == 0 {
            l += 4.0;
        }
        rows.push(r);
        obs.push(l);
    }
    let w = vec![1.0; rows.len()];
    let ls = weighted_least_squares(&rows, &obs, &w)?;
    let lad = wlad_solve(&rows, &obs, &w, &WladOptions::default())?;
    let err = |x: &Row| (0..N_PARAMS).map(|k| (x[k] - truth[k]).powi(2)).sum::<f64>().sqrt();
    println!("truth {truth:.3?}");
    println!("LS    {:.3?}  error {:.4}", ls, err(&ls));
    println!("WLAD  {:.3?}  error {:.4}  ({} IRLS iterations)", lad.x, err(&lad.x), lad.iterations);
    Ok(())
}
