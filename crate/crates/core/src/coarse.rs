//! Integer-pixel template matching between two phase congruency maps.
//!
//! Every metric is oriented so that larger is better: SSD and LAD are
//! negated sums, NCC and SSIM are similarity coefficients.

use serde::{Deserialize, Serialize};

use crate::detect::Keypoint;
use crate::error::{Error, Result};
use crate::raster::Raster;

/// SSIM stabilizers for a unit dynamic range.
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
pub const SSIM_C3: f64 = SSIM_C2 / 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Ssd,
    Lad,
    Ncc,
    Ssim,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Ssd, Metric::Lad, Metric::Ncc, Metric::Ssim];
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ssd" => Ok(Metric::Ssd),
            "lad" => Ok(Metric::Lad),
            "ncc" => Ok(Metric::Ncc),
            "ssim" => Ok(Metric::Ssim),
            other => Err(Error::Parameter(format!("unknown metric '{other}'"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Ssd => "ssd",
            Metric::Lad => "lad",
            Metric::Ncc => "ncc",
            Metric::Ssim => "ssim",
        })
    }
}

/// Population mean and (co)variances of a window pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairStats {
    pub mean_g: f64,
    pub mean_i: f64,
    pub var_g: f64,
    pub var_i: f64,
    pub cov: f64,
}

impl PairStats {
    pub fn new(g: &[f64], i: &[f64]) -> Self {
        assert_eq!(g.len(), i.len(), "windows differ in size");
        assert!(!g.is_empty());
        let n = g.len() as f64;
        let mean_g = g.iter().sum::<f64>() / n;
        let mean_i = i.iter().sum::<f64>() / n;
        let (mut var_g, mut var_i, mut cov) = (0.0, 0.0, 0.0);
        for (&a, &b) in g.iter().zip(i) {
            let (da, db) = (a - mean_g, b - mean_i);
            var_g += da * da;
            var_i += db * db;
            cov += da * db;
        }
        PairStats {
            mean_g,
            mean_i,
            var_g: var_g / n,
            var_i: var_i / n,
            cov: cov / n,
        }
    }

    fn ssim(&self, c1: f64, c2: f64) -> f64 {
        ssim_from_moments(self.mean_g, self.mean_i, self.var_g, self.var_i, self.cov, c1, c2)
    }

    fn ncc(&self) -> f64 {
        let d = (self.var_g * self.var_i).sqrt();
        if d > 0.0 {
            (self.cov / d).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    }
}

#[inline]
fn ssim_from_moments(mg: f64, mi: f64, vg: f64, vi: f64, cov: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * mg * mi + c1) * (2.0 * cov + c2)) / ((mg * mg + mi * mi + c1) * (vg + vi + c2))
}

/// Structural similarity of two equal-size windows with `alpha = beta =
/// gamma = 1` and population variances.
pub fn ssim_patch(g: &[f64], i: &[f64], c1: f64, c2: f64) -> f64 {
    assert!(g.len() >= 2, "ssim needs at least two samples");
    PairStats::new(g, i).ssim(c1, c2)
}

/// SSIM with the default unit-range stabilizers.
pub fn ssim(g: &[f64], i: &[f64]) -> f64 {
    ssim_patch(g, i, SSIM_C1, SSIM_C2)
}

/// Zero-mean normalized cross-correlation; 0 if either window is flat.
pub fn ncc(g: &[f64], i: &[f64]) -> f64 {
    PairStats::new(g, i).ncc()
}

pub fn metric_score(g: &[f64], i: &[f64], metric: Metric) -> f64 {
    assert_eq!(g.len(), i.len(), "windows differ in size");
    match metric {
        Metric::Ssd => -g.iter().zip(i).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
        Metric::Lad => -g.iter().zip(i).map(|(a, b)| (a - b).abs()).sum::<f64>(),
        Metric::Ncc => ncc(g, i),
        Metric::Ssim => ssim(g, i),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    /// Odd side length of the template window.
    pub template_size: usize,
    pub search_radius: usize,
    pub metric: Metric,
}

impl Default for TemplateSpec {
    fn default() -> Self {
        TemplateSpec {
            template_size: 101,
            search_radius: 10,
            metric: Metric::Ssim,
        }
    }
}

impl TemplateSpec {
    pub fn validate(&self) -> Result<()> {
        if self.template_size < 5 || self.template_size % 2 == 0 {
            return Err(Error::Parameter(format!(
                "template size must be odd and >= 5, got {}",
                self.template_size
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoarseMatch {
    pub kp: Keypoint,
    pub tgt_x: i64,
    pub tgt_y: i64,
    /// Metric value at the optimum.
    pub score: f64,
    /// SSIM of the winning window pair, whatever the search metric.
    pub ssim: f64,
}

/// Summed-area tables of a raster and its square.
struct Integral {
    stride: usize,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Integral {
    fn new(r: &Raster) -> Self {
        let (w, h) = (r.width(), r.height());
        let stride = w + 1;
        let mut sum = vec![0.0; stride * (h + 1)];
        let mut sq = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let (mut rs, mut rq) = (0.0, 0.0);
            for x in 0..w {
                let v = r.get(x, y);
                rs += v;
                rq += v * v;
                sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + rs;
                sq[(y + 1) * stride + x + 1] = sq[y * stride + x + 1] + rq;
            }
        }
        Integral { stride, sum, sq }
    }

    /// Sums over the box `[x0, x0+size) × [y0, y0+size)`.
    #[inline]
    fn box_sums(&self, x0: usize, y0: usize, size: usize) -> (f64, f64) {
        let s = self.stride;
        let (x1, y1) = (x0 + size, y0 + size);
        let f = |t: &[f64]| t[y1 * s + x1] - t[y0 * s + x1] - t[y1 * s + x0] + t[y0 * s + x0];
        (f(&self.sum), f(&self.sq))
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

/// Exhaustive template search with cached target statistics; share one
/// matcher across all keypoints of an image pair.
pub struct CoarseMatcher<'a> {
    reference: &'a Raster,
    target: &'a Raster,
    integral: Integral,
}

impl<'a> CoarseMatcher<'a> {
    pub fn new(reference: &'a Raster, target: &'a Raster) -> Self {
        CoarseMatcher {
            reference,
            target,
            integral: Integral::new(target),
        }
    }

    /// Searches the `(2r+1)²` candidate centres around `predicted` for the
    /// window best matching the template at `kp`. Ties go to the candidate
    /// closest to `predicted`, then to the smaller `(y, x)`.
    pub fn match_keypoint(&self, kp: &Keypoint, spec: &TemplateSpec, predicted: (i64, i64)) -> Result<CoarseMatch> {
        spec.validate()?;
        let m = spec.template_size;
        let half = (m / 2) as i64;
        let r = spec.search_radius as i64;
        let g = self.reference.window(kp.x as isize, kp.y as isize, m)?;
        let (px, py) = predicted;
        let (tw, th) = (self.target.width() as i64, self.target.height() as i64);
        if px - r - half < 0 || py - r - half < 0 || px + r + half >= tw || py + r + half >= th {
            return Err(Error::WindowOutOfBounds);
        }

        let n = (m * m) as f64;
        let sum_g: f64 = g.iter().sum();
        let mean_g = sum_g / n;
        let sum_gg: f64 = g.iter().map(|v| v * v).sum();
        let var_g = (sum_gg / n - mean_g * mean_g).max(0.0);

        let mut best: Option<(f64, i64, i64)> = None;
        for dy in -r..=r {
            for dx in -r..=r {
                let (cx, cy) = (px + dx, py + dy);
                let (x0, y0) = ((cx - half) as usize, (cy - half) as usize);
                let score = match spec.metric {
                    Metric::Lad => {
                        let mut acc = 0.0;
                        for row in 0..m {
                            let t = &self.target.row(y0 + row)[x0..x0 + m];
                            let gr = &g[row * m..(row + 1) * m];
                            acc += gr.iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>();
                        }
                        -acc
                    }
                    _ => {
                        let mut cross = 0.0;
                        for row in 0..m {
                            let t = &self.target.row(y0 + row)[x0..x0 + m];
                            cross += dot(&g[row * m..(row + 1) * m], t);
                        }
                        let (sum_i, sum_ii) = self.integral.box_sums(x0, y0, m);
                        let mean_i = sum_i / n;
                        let var_i = (sum_ii / n - mean_i * mean_i).max(0.0);
                        let cov = cross / n - mean_g * mean_i;
                        match spec.metric {
                            Metric::Ssd => -(sum_gg - 2.0 * cross + sum_ii),
                            Metric::Ncc => {
                                let d = (var_g * var_i).sqrt();
                                if d > 0.0 {
                                    cov / d
                                } else {
                                    0.0
                                }
                            }
                            Metric::Ssim => ssim_from_moments(mean_g, mean_i, var_g, var_i, cov, SSIM_C1, SSIM_C2),
                            Metric::Lad => unreachable!(),
                        }
                    }
                };
                let better = match best {
                    None => true,
                    Some((s, bx, by)) => {
                        score > s
                            || (score == s && dx * dx + dy * dy < (bx - px).pow(2) + (by - py).pow(2))
                    }
                };
                if better {
                    best = Some((score, cx, cy));
                }
            }
        }
        let (_, tx, ty) = best.expect("search region is never empty");
        let i = self.target.window(tx as isize, ty as isize, m)?;
        Ok(CoarseMatch {
            kp: *kp,
            tgt_x: tx,
            tgt_y: ty,
            score: metric_score(&g, &i, spec.metric),
            ssim: ssim(&g, &i),
        })
    }
}

/// One-shot coarse match; prefer [`CoarseMatcher`] for many keypoints.
pub fn coarse_match(pc_ref: &Raster, pc_tgt: &Raster, kp: &Keypoint, spec: &TemplateSpec, predicted: (i64, i64)) -> Result<CoarseMatch> {
    CoarseMatcher::new(pc_ref, pc_tgt).match_keypoint(kp, spec, predicted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ssim_worked_examples() {
        let g = [0.1, 0.7, 0.3, 0.9, 0.2];
        assert!((ssim(&g, &g) - 1.0).abs() < 1e-15);
        assert_eq!(ssim(&[0.5; 4], &[0.5; 4]), 1.0);
        // hand evaluation: means 0.5, variances 0.25, covariance -0.25
        let s = ssim_patch(&[0.0, 1.0, 0.0, 1.0], &[1.0, 0.0, 1.0, 0.0], 1e-4, 1e-4);
        let want = (0.5 + 1e-4) * (-0.5 + 1e-4) / ((0.5 + 1e-4) * (0.5 + 1e-4));
        assert!((s - want).abs() < 1e-15);
        assert!((s + 0.9996).abs() < 1e-4);
    }

    #[test]
    fn metric_maxima_on_identity() {
        let g = [0.2, 0.4, 0.1, 0.8];
        assert_eq!(metric_score(&g, &g, Metric::Ssd), 0.0);
        assert_eq!(metric_score(&g, &g, Metric::Lad), 0.0);
        assert!((metric_score(&g, &g, Metric::Ncc) - 1.0).abs() < 1e-15);
        assert!((metric_score(&g, &g, Metric::Ssim) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn metric_direct_sums() {
        assert_eq!(metric_score(&[0.0, 1.0], &[1.0, 1.0], Metric::Ssd), -1.0);
        assert_eq!(metric_score(&[0.0, 1.0], &[1.0, 1.0], Metric::Lad), -1.0);
        assert!((ncc(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
        assert_eq!(ncc(&[1.0, 1.0, 1.0], &[2.0, 4.0, 6.0]), 0.0);
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.to_string().parse::<Metric>().unwrap(), m);
        }
        assert!("mi".parse::<Metric>().is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(TemplateSpec::default().validate().is_ok());
        let even = TemplateSpec { template_size: 20, ..Default::default() };
        assert!(even.validate().is_err());
        let tiny = TemplateSpec { template_size: 3, ..Default::default() };
        assert!(tiny.validate().is_err());
    }

    #[test]
    fn border_infeasible() {
        let r = Raster::filled(64, 64, 0.0);
        let kp = Keypoint { x: 10, y: 32, score: 1.0 };
        let spec = TemplateSpec { template_size: 21, search_radius: 3, metric: Metric::Ssim };
        assert!(matches!(coarse_match(&r, &r, &kp, &spec, (10, 32)), Err(Error::WindowOutOfBounds)));
        let kp = Keypoint { x: 32, y: 32, score: 1.0 };
        assert!(coarse_match(&r, &r, &kp, &spec, (51, 32)).is_err());
        assert!(coarse_match(&r, &r, &kp, &spec, (50, 32)).is_ok());
        assert!(coarse_match(&r, &r, &kp, &spec, (32, 32)).is_ok());
    }

    #[test]
    fn flat_target_prefers_predicted_centre() {
        let r = Raster::from_fn(64, 64, |x, y| ((x * 7 + y * 5) % 13) as f64 / 13.0);
        let flat = Raster::filled(64, 64, 0.25);
        let kp = Keypoint { x: 32, y: 32, score: 1.0 };
        for metric in Metric::ALL {
            let spec = TemplateSpec { template_size: 11, search_radius: 4, metric };
            let m = coarse_match(&r, &flat, &kp, &spec, (31, 33)).unwrap();
            assert_eq!((m.tgt_x, m.tgt_y), (31, 33), "{metric}");
        }
    }
}
