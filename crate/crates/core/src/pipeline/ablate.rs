use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::run::{coarse_stage, fine_stage, phase_congruency_pair};
use super::PipelineConfig;
use crate::coarse::Metric;
use crate::detect::{detect_fast, FastConfig};
use crate::error::{Error, Result};
use crate::eval::{convergence_rate, score_matches, Correspondence, Truth, NCM_THRESHOLD};
use crate::phase::NoiseMode;
use crate::raster::{AffinePair, Raster};

/// One cell of the factorial sweep.
#[derive(Clone, Debug, Serialize)]
pub struct AblationCell {
    pub metric: Metric,
    pub size: usize,
    pub noise_mode: NoiseMode,
    /// Correct-match rate of the integer coarse matches.
    pub cmr: f64,
    pub coarse_ncm: usize,
    pub coarse_total: usize,
    /// RMSE of the converged fine matches.
    pub rmse: Option<f64>,
    pub convergence_rate: f64,
}

/// Sweeps metric × window size × noise mode. Keypoints are detected once on
/// the reference PC without noise compensation, with the border margin of
/// the largest size plus the search radius, so every cell scores the same
/// keypoints. Each size sets
/// both the template and the refinement window.
pub fn run_ablation(
    reference: &Raster,
    target: &Raster,
    truth: &AffinePair,
    metrics: &[Metric],
    sizes: &[usize],
    noise_modes: &[NoiseMode],
    base: &PipelineConfig,
) -> Result<Vec<AblationCell>> {
    if metrics.is_empty() || sizes.is_empty() || noise_modes.is_empty() {
        return Err(Error::Parameter("ablation needs at least one metric, size and noise mode".into()));
    }
    let largest = *sizes.iter().max().expect("non-empty");
    let mut cfg = base.clone();
    cfg.pc.noise_mode = NoiseMode::Off;
    let (off_ref, _) = phase_congruency_pair(reference, target, &cfg)?;
    let fast = FastConfig {
        margin: FastConfig::margin_for_windows(largest, largest) + cfg.template.search_radius,
        ..cfg.fast_config()
    };
    let keypoints = detect_fast(&off_ref, &fast);
    if keypoints.is_empty() {
        return Err(Error::Estimation("no keypoints detected".into()));
    }

    let mut pcs = BTreeMap::new();
    for &mode in noise_modes {
        cfg.pc.noise_mode = mode;
        pcs.insert(mode.to_string(), phase_congruency_pair(reference, target, &cfg)?);
    }
    let truth = Truth::KnownTransform(*truth);
    let mut cells = Vec::new();
    for &metric in metrics {
        for &size in sizes {
            for &mode in noise_modes {
                let (pc_ref, pc_tgt) = &pcs[&mode.to_string()];
                let mut c = base.clone();
                c.pc.noise_mode = mode;
                c.template.metric = metric;
                c.template.template_size = size;
                c.fine.window_size = size;
                c.validate()?;
                let coarse = coarse_stage(pc_ref, pc_tgt, &keypoints, &c);
                let fine = fine_stage(pc_ref, pc_tgt, &coarse, &c)?;
                let cpts: Vec<Correspondence> = coarse.iter().map(Correspondence::from).collect();
                let fpts: Vec<Correspondence> = fine.iter().filter(|m| m.converged).map(Correspondence::from).collect();
                let cr = score_matches(&cpts, &truth, NCM_THRESHOLD).ok();
                let fr = score_matches(&fpts, &truth, NCM_THRESHOLD).ok();
                let coarse_ncm = cr.as_ref().map_or(0, |r| r.ncm);
                cells.push(AblationCell {
                    metric,
                    size,
                    noise_mode: mode,
                    cmr: cr.as_ref().map_or(0.0, |r| r.cmr),
                    coarse_ncm,
                    coarse_total: cr.as_ref().map_or(0, |r| r.total),
                    rmse: fr.as_ref().and_then(|r| r.rmse),
                    convergence_rate: convergence_rate(coarse_ncm, fr.as_ref().map_or(0, |r| r.ncm)),
                });
            }
        }
    }
    Ok(cells)
}

pub fn write_ablation_csv(path: &Path, cells: &[AblationCell]) -> Result<()> {
    let fail = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    w.write_record(["metric", "size", "noise_mode", "cmr", "rmse", "convergence_rate", "coarse_ncm", "coarse_total"])
        .map_err(fail)?;
    for c in cells {
        w.write_record([
            c.metric.to_string(),
            c.size.to_string(),
            c.noise_mode.to_string(),
            c.cmr.to_string(),
            c.rmse.map(|v| v.to_string()).unwrap_or_default(),
            c.convergence_rate.to_string(),
            c.coarse_ncm.to_string(),
            c.coarse_total.to_string(),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
