//! Outlier removal, epipolar geometry and match-quality metrics.

mod fundamental;
mod ransac;

pub use fundamental::{epipolar_residual, point_line_residual, FundamentalMatrix};
pub use ransac::{fit_affine, ransac_model, Model, ModelKind, RansacConfig, RansacResult};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coarse::CoarseMatch;
use crate::error::{Error, Result};
use crate::fine::FineMatch;
use crate::raster::AffinePair;

/// Residual magnitude (pixels) below which a match counts as correct.
pub const NCM_THRESHOLD: f64 = 2.0;
/// RMSE (pixels) above which a pair is reported as a matching failure.
pub const FAILURE_RMSE: f64 = 2.0;

/// A point in the reference image and its match in the target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl From<&CoarseMatch> for Correspondence {
    fn from(m: &CoarseMatch) -> Self {
        Correspondence {
            x1: m.kp.x as f64,
            y1: m.kp.y as f64,
            x2: m.tgt_x as f64,
            y2: m.tgt_y as f64,
        }
    }
}

impl From<&FineMatch> for Correspondence {
    fn from(m: &FineMatch) -> Self {
        Correspondence {
            x1: m.kp.x as f64,
            y1: m.kp.y as f64,
            x2: m.tgt_x,
            y2: m.tgt_y,
        }
    }
}

/// Source of the per-match residuals.
#[derive(Clone, Debug, PartialEq)]
pub enum Truth {
    /// Exact reference-to-target map, as produced by synthesis.
    KnownTransform(AffinePair),
    /// True target positions, one per match.
    GroundTruthPoints(Vec<(f64, f64)>),
    Fundamental(FundamentalMatrix),
}

impl Truth {
    fn residual(&self, k: usize, m: &Correspondence) -> Option<[f64; 2]> {
        match self {
            Truth::KnownTransform(t) => {
                let (x, y) = t.apply(m.x1, m.y1);
                Some([m.x2 - x, m.y2 - y])
            }
            Truth::GroundTruthPoints(p) => p.get(k).map(|&(x, y)| [m.x2 - x, m.y2 - y]),
            Truth::Fundamental(h) => epipolar_residual(h, m),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Number of correct matches.
    pub ncm: usize,
    /// Number of scored matches; degenerate residuals are excluded.
    pub total: usize,
    pub cmr: f64,
    /// Root-mean-square residual over the correct matches; `None` when there are none.
    pub rmse: Option<f64>,
    pub failure: bool,
    /// Fine-stage correct matches relative to the coarse stage, when known.
    pub convergence_rate: Option<f64>,
    /// Per-match residual vectors, `None` where the residual is undefined.
    pub residuals: Vec<Option<[f64; 2]>>,
}

impl EvalReport {
    pub fn with_convergence(mut self, coarse_ncm: usize) -> Self {
        self.convergence_rate = Some(convergence_rate(coarse_ncm, self.ncm));
        self
    }
}

/// Root-mean-square of residual vectors.
pub fn rmse(residuals: impl IntoIterator<Item = [f64; 2]>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for r in residuals {
        sum += r[0] * r[0] + r[1] * r[1];
        n += 1;
    }
    (n > 0).then(|| (sum / n as f64).sqrt())
}

pub fn score_matches(matches: &[Correspondence], truth: &Truth, ncm_threshold: f64) -> Result<EvalReport> {
    if matches.is_empty() {
        return Err(Error::Estimation("no matches to score".into()));
    }
    if let Truth::GroundTruthPoints(p) = truth {
        if p.len() != matches.len() {
            return Err(Error::Parameter(format!(
                "{} ground-truth points for {} matches",
                p.len(),
                matches.len()
            )));
        }
    }
    let residuals: Vec<Option<[f64; 2]>> = matches.iter().enumerate().map(|(k, m)| truth.residual(k, m)).collect();
    let total = residuals.iter().flatten().count();
    let correct: Vec<[f64; 2]> = residuals
        .iter()
        .flatten()
        .copied()
        .filter(|r| r[0].hypot(r[1]) < ncm_threshold)
        .collect();
    let ncm = correct.len();
    let rmse = rmse(correct);
    Ok(EvalReport {
        ncm,
        total,
        cmr: if total > 0 { ncm as f64 / total as f64 } else { 0.0 },
        rmse,
        failure: rmse.map_or(true, |r| r > FAILURE_RMSE),
        convergence_rate: None,
        residuals,
    })
}

/// `fine / coarse`, clamped to `[0, 1]`.
pub fn convergence_rate(coarse_ncm: usize, fine_ncm: usize) -> f64 {
    if coarse_ncm == 0 {
        log::warn!("convergence rate with no correct coarse matches");
        return 0.0;
    }
    if fine_ncm > coarse_ncm {
        log::warn!("fine stage has more correct matches ({fine_ncm}) than coarse ({coarse_ncm})");
    }
    (fine_ncm as f64 / coarse_ncm as f64).min(1.0)
}

#[derive(Serialize)]
struct ReportJson<'a> {
    schema: u32,
    ncm: usize,
    total: usize,
    cmr: f64,
    rmse: Option<f64>,
    failure: bool,
    convergence_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extra: Option<&'a serde_json::Value>,
}

/// Writes the scalar metrics as JSON.
pub fn write_report_json(path: &Path, report: &EvalReport, extra: Option<&serde_json::Value>) -> Result<()> {
    let j = ReportJson {
        schema: 1,
        ncm: report.ncm,
        total: report.total,
        cmr: report.cmr,
        rmse: report.rmse,
        failure: report.failure,
        convergence_rate: report.convergence_rate,
        extra,
    };
    let text = serde_json::to_string_pretty(&j).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Writes one row per match: coordinates, residual vector and magnitude.
pub fn write_residuals_csv(path: &Path, matches: &[Correspondence], report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["index", "x1", "y1", "x2", "y2", "rx", "ry", "magnitude", "correct"])
        .map_err(|e| csv_err(path, e))?;
    for (k, (m, r)) in matches.iter().zip(&report.residuals).enumerate() {
        let (rx, ry, mag, ok) = match r {
            Some([rx, ry]) => {
                let mag = rx.hypot(*ry);
                (rx.to_string(), ry.to_string(), mag.to_string(), (mag < NCM_THRESHOLD).to_string())
            }
            None => (String::new(), String::new(), String::new(), "false".into()),
        };
        w.write_record([
            k.to_string(),
            m.x1.to_string(),
            m.y1.to_string(),
            m.x2.to_string(),
            m.y2.to_string(),
            rx,
            ry,
            mag,
            ok,
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `x1, y1, x2, y2` columns from a CSV with a header row. Other
/// columns are ignored.
pub fn read_matches_csv(path: &Path) -> Result<Vec<Correspondence>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Format(format!("{}: missing column '{name}'", path.display())))
    };
    let idx = [col("x1")?, col("y1")?, col("x2")?, col("y2")?];
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let mut v = [0.0; 4];
        for (slot, &i) in v.iter_mut().zip(&idx) {
            let field = rec.get(i).unwrap_or("");
            *slot = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("{}: row {}: bad number '{field}'", path.display(), line + 2)))?;
        }
        out.push(Correspondence { x1: v[0], y1: v[1], x2: v[2], y2: v[3] });
    }
    Ok(out)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Format(format!("{}: {e}", path.display()))
    }
}
