use nalgebra::{Matrix3, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Correspondence, FundamentalMatrix};
use crate::error::{Error, Result};
use crate::raster::AffinePair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Affine,
    Fundamental,
}

impl ModelKind {
    pub fn sample_size(self) -> usize {
        match self {
            ModelKind::Affine => 3,
            ModelKind::Fundamental => 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Affine(AffinePair),
    Fundamental(FundamentalMatrix),
}

impl Model {
    /// Transfer error for affine models, epipolar distance for fundamental
    /// ones. `None` for a degenerate epipolar line.
    pub fn error(&self, m: &Correspondence) -> Option<f64> {
        match self {
            Model::Affine(t) => {
                let (x, y) = t.apply(m.x1, m.y1);
                Some((m.x2 - x).hypot(m.y2 - y))
            }
            Model::Fundamental(h) => h.distance(m),
        }
    }

    fn fit(kind: ModelKind, matches: &[Correspondence]) -> Result<Model> {
        match kind {
            ModelKind::Affine => fit_affine(matches).map(Model::Affine),
            ModelKind::Fundamental => FundamentalMatrix::estimate(matches).map(Model::Fundamental),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RansacConfig {
    /// Inlier threshold in pixels.
    pub threshold: f64,
    pub max_trials: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig {
            threshold: 2.0,
            max_trials: 10_000,
            confidence: 0.999,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RansacResult {
    pub model: Model,
    pub inliers: Vec<bool>,
    pub trials: usize,
}

impl RansacResult {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

/// Least-squares affine map from first to second points.
pub fn fit_affine(matches: &[Correspondence]) -> Result<AffinePair> {
    if matches.len() < 3 {
        return Err(Error::Estimation(format!("affine fit needs at least 3 matches, got {}", matches.len())));
    }
    let (cx, cy) = matches.iter().fold((0.0, 0.0), |a, m| (a.0 + m.x1, a.1 + m.y1));
    let n = matches.len() as f64;
    let (cx, cy) = (cx / n, cy / n);
    let mut ata = Matrix3::zeros();
    let mut bx = Vector3::zeros();
    let mut by = Vector3::zeros();
    for m in matches {
        let v = Vector3::new(1.0, m.x1 - cx, m.y1 - cy);
        ata += v * v.transpose();
        bx += v * m.x2;
        by += v * m.y2;
    }
    let scale = ata.diagonal().max().max(1.0);
    let eig = (ata / scale).symmetric_eigenvalues();
    if eig.min() < 1e-10 * eig.max() {
        return Err(Error::Estimation("collinear points".into()));
    }
    let chol = ata.cholesky().ok_or(Error::Estimation("collinear points".into()))?;
    let px = chol.solve(&bx);
    let py = chol.solve(&by);
    // Undo the centring: x2 = p0 + p1 (x - cx) + p2 (y - cy).
    Ok(AffinePair {
        a0: px[0] - px[1] * cx - px[2] * cy,
        a1: px[1],
        a2: px[2],
        b0: py[0] - py[1] * cx - py[2] * cy,
        b1: py[1],
        b2: py[2],
    })
}

struct Score {
    count: usize,
    error_sum: f64,
}

fn score(model: &Model, matches: &[Correspondence], threshold: f64) -> (Score, Vec<bool>) {
    let mut s = Score { count: 0, error_sum: 0.0 };
    let mask = matches
        .iter()
        .map(|m| match model.error(m) {
            Some(e) if e <= threshold => {
                s.count += 1;
                s.error_sum += e;
                true
            }
            _ => false,
        })
        .collect();
    (s, mask)
}

fn better(a: &Score, b: &Score) -> bool {
    a.count > b.count || (a.count == b.count && a.error_sum < b.error_sum)
}

/// Robust model fit. Samples minimal sets until the adaptive trial count
/// for the requested confidence is reached, keeps the model with the most
/// inliers (ties to the lower inlier error sum, then the earlier trial) and
/// refits it on its inliers. The refit is kept only if it does not lose
/// consensus, so every reported inlier is within the threshold.
pub fn ransac_model(matches: &[Correspondence], kind: ModelKind, cfg: &RansacConfig) -> Result<RansacResult> {
    let s = kind.sample_size();
    if matches.len() < s {
        return Err(Error::Estimation(format!(
            "{kind:?} model needs at least {s} matches, got {}",
            matches.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(Model, Score, Vec<bool>)> = None;
    let mut needed = cfg.max_trials;
    let mut trials = 0;
    let mut subset = Vec::with_capacity(s);
    while trials < needed.min(cfg.max_trials) {
        trials += 1;
        subset.clear();
        subset.extend(sample(&mut rng, matches.len(), s).into_iter().map(|k| matches[k]));
        let Ok(model) = Model::fit(kind, &subset) else {
            continue;
        };
        let (sc, mask) = score(&model, matches, cfg.threshold);
        if best.as_ref().map_or(true, |b| better(&sc, &b.1)) {
            let w = sc.count as f64 / matches.len() as f64;
            needed = adaptive_trials(w, s, cfg.confidence);
            best = Some((model, sc, mask));
        }
    }
    let Some((model, sc, mask)) = best else {
        return Err(Error::Estimation("every sample was degenerate".into()));
    };

    let inliers: Vec<Correspondence> = matches.iter().zip(&mask).filter(|p| *p.1).map(|p| *p.0).collect();
    if let Ok(refit) = Model::fit(kind, &inliers) {
        let (rs, rmask) = score(&refit, matches, cfg.threshold);
        if rs.count >= sc.count {
            return Ok(RansacResult { model: refit, inliers: rmask, trials });
        }
    }
    Ok(RansacResult { model, inliers: mask, trials })
}

fn adaptive_trials(inlier_ratio: f64, s: usize, confidence: f64) -> usize {
    let good = inlier_ratio.powi(s as i32);
    if good >= 1.0 {
        return 1;
    }
    if good <= 0.0 {
        return usize::MAX;
    }
    let n = (1.0 - confidence).ln() / (1.0 - good).ln();
    if n.is_finite() {
        n.ceil().max(1.0) as usize
    } else {
        usize::MAX
    }
}
