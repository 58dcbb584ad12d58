use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::PipelineConfig;
use crate::coarse::{CoarseMatch, CoarseMatcher};
use crate::detect::{detect_fast, Keypoint};
use crate::error::{Error, Result};
use crate::eval::{convergence_rate, ransac_model, score_matches, Correspondence, EvalReport, ModelKind, RansacConfig, RansacResult, Truth, NCM_THRESHOLD};
use crate::fine::{FineMatch, FineMatcher};
use crate::phase::{compute_pc_with_bank, FilterBank};
use crate::raster::{AffinePair, Raster};

/// Wall-clock time per stage, in milliseconds.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Timings {
    pub phase_congruency: f64,
    pub detection: f64,
    pub coarse: f64,
    pub fine: f64,
    pub ransac: f64,
}

/// Intermediate and final products of one matching run.
#[derive(Clone, Debug)]
pub struct MatchRun {
    pub pc_ref: Raster,
    pub pc_tgt: Raster,
    pub keypoints: Vec<Keypoint>,
    /// Coarse matches in keypoint order; keypoints whose search region
    /// leaves the target are dropped.
    pub coarse: Vec<CoarseMatch>,
    /// Refinements of the coarse matches that passed the SSIM gate, in the same order.
    pub fine: Vec<FineMatch>,
    /// Affine consensus over the converged fine matches.
    pub ransac: Option<RansacResult>,
    pub timings: Timings,
}

impl MatchRun {
    pub fn converged(&self) -> impl Iterator<Item = &FineMatch> {
        self.fine.iter().filter(|m| m.converged)
    }

    /// Converged fine matches kept by the consensus step.
    pub fn inliers(&self) -> Vec<&FineMatch> {
        match &self.ransac {
            Some(r) => self.converged().zip(&r.inliers).filter(|p| *p.1).map(|p| p.0).collect(),
            None => Vec::new(),
        }
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Phase congruency of both images with one shared filter bank.
pub fn phase_congruency_pair(reference: &Raster, target: &Raster, cfg: &PipelineConfig) -> Result<(Raster, Raster)> {
    if (reference.width(), reference.height()) != (target.width(), target.height()) {
        return Err(Error::Parameter(format!(
            "image sizes differ: {}x{} vs {}x{}",
            reference.width(),
            reference.height(),
            target.width(),
            target.height()
        )));
    }
    let bank = FilterBank::new(reference.width(), reference.height(), cfg.pc)?;
    let a = compute_pc_with_bank(reference, &bank, false)?.pc;
    let b = compute_pc_with_bank(target, &bank, false)?.pc;
    Ok((a, b))
}

/// Coarse-matches every keypoint around its own position in the target.
pub fn coarse_stage(pc_ref: &Raster, pc_tgt: &Raster, keypoints: &[Keypoint], cfg: &PipelineConfig) -> Vec<CoarseMatch> {
    let matcher = CoarseMatcher::new(pc_ref, pc_tgt);
    let spec = cfg.template;
    keypoints
        .par_iter()
        .map(|kp| matcher.match_keypoint(kp, &spec, (kp.x as i64, kp.y as i64)).ok())
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

pub fn fine_stage(pc_ref: &Raster, pc_tgt: &Raster, coarse: &[CoarseMatch], cfg: &PipelineConfig) -> Result<Vec<FineMatch>> {
    let matcher = FineMatcher::new(pc_ref, pc_tgt, cfg.fine)?;
    let out: Vec<Option<FineMatch>> = coarse.par_iter().map(|c| matcher.refine(c).ok()).collect();
    Ok(out.into_iter().flatten().collect())
}

/// Detection, coarse matching, gating, refinement and affine consensus.
pub fn run_match(reference: &Raster, target: &Raster, cfg: &PipelineConfig) -> Result<MatchRun> {
    cfg.validate()?;
    let mut timings = Timings::default();

    let t = Instant::now();
    let (pc_ref, pc_tgt) = phase_congruency_pair(reference, target, cfg)?;
    timings.phase_congruency = ms_since(t);

    let t = Instant::now();
    let keypoints = detect_fast(&pc_ref, &cfg.fast_config());
    timings.detection = ms_since(t);
    if keypoints.is_empty() {
        return Err(Error::Estimation("no keypoints detected".into()));
    }

    let t = Instant::now();
    let coarse = coarse_stage(&pc_ref, &pc_tgt, &keypoints, cfg);
    timings.coarse = ms_since(t);
    if coarse.is_empty() {
        return Err(Error::Estimation("no coarse matches".into()));
    }

    let t = Instant::now();
    let gated: Vec<CoarseMatch> = coarse.iter().filter(|m| m.ssim >= cfg.coarse_gate).copied().collect();
    let fine = fine_stage(&pc_ref, &pc_tgt, &gated, cfg)?;
    timings.fine = ms_since(t);

    let t = Instant::now();
    let pts: Vec<Correspondence> = fine.iter().filter(|m| m.converged).map(Correspondence::from).collect();
    if pts.is_empty() {
        return Err(Error::Estimation("no fine match converged".into()));
    }
    let rc = RansacConfig {
        threshold: cfg.ransac_threshold,
        seed: cfg.seed,
        ..Default::default()
    };
    let ransac = ransac_model(&pts, ModelKind::Affine, &rc).ok();
    timings.ransac = ms_since(t);

    Ok(MatchRun {
        pc_ref,
        pc_tgt,
        keypoints,
        coarse,
        fine,
        ransac,
        timings,
    })
}

/// Scores of one run against a known reference-to-target map.
#[derive(Clone, Debug, Serialize)]
pub struct RunEvaluation {
    /// Integer coarse positions of every coarse match.
    pub coarse: EvalReport,
    /// Converged fine matches.
    pub fine: EvalReport,
    /// Converged fine matches kept by the consensus step.
    pub inliers: EvalReport,
    pub convergence_rate: f64,
}

fn score_or_empty(pts: &[Correspondence], truth: &Truth) -> EvalReport {
    score_matches(pts, truth, NCM_THRESHOLD).unwrap_or(EvalReport {
        ncm: 0,
        total: 0,
        cmr: 0.0,
        rmse: None,
        failure: true,
        convergence_rate: None,
        residuals: Vec::new(),
    })
}

pub fn evaluate_run(run: &MatchRun, truth: &AffinePair) -> RunEvaluation {
    let truth = Truth::KnownTransform(*truth);
    let coarse: Vec<Correspondence> = run.coarse.iter().map(Correspondence::from).collect();
    let fine: Vec<Correspondence> = run.converged().map(Correspondence::from).collect();
    let inl: Vec<Correspondence> = run.inliers().into_iter().map(Correspondence::from).collect();
    let coarse = score_or_empty(&coarse, &truth);
    let fine = score_or_empty(&fine, &truth).with_convergence(coarse.ncm);
    let inliers = score_or_empty(&inl, &truth);
    RunEvaluation {
        convergence_rate: convergence_rate(coarse.ncm, fine.ncm),
        coarse,
        fine,
        inliers,
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    let fail = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(&r).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn keypoint_index(run: &MatchRun) -> impl Fn(&Keypoint) -> usize + '_ {
    move |kp| {
        run.keypoints
            .iter()
            .position(|k| k.x == kp.x && k.y == kp.y)
            .expect("match refers to a detected keypoint")
    }
}

fn fine_row(idx: usize, m: &FineMatch) -> Vec<String> {
    let p = &m.params;
    let status = serde_json::to_value(m.status).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
    vec![
        idx.to_string(),
        m.kp.x.to_string(),
        m.kp.y.to_string(),
        m.tgt_x.to_string(),
        m.tgt_y.to_string(),
        m.converged.to_string(),
        status,
        m.iterations.to_string(),
        m.initial_ssim.to_string(),
        m.final_ssim.to_string(),
        p.r0.to_string(),
        p.r1.to_string(),
        p.a0.to_string(),
        p.a1.to_string(),
        p.a2.to_string(),
        p.b0.to_string(),
        p.b1.to_string(),
        p.b2.to_string(),
    ]
}

const FINE_HEADER: &[&str] = &[
    "index", "x1", "y1", "x2", "y2", "converged", "status", "iterations", "initial_ssim", "final_ssim", "r0", "r1", "a0", "a1", "a2", "b0", "b1", "b2",
];

/// Writes `coarse.csv`, `fine.csv`, `inliers.csv` and `summary.json` into
/// `dir`. Rows follow keypoint order; `index` is the keypoint index.
pub fn write_match_outputs(dir: &Path, run: &MatchRun, cfg: &PipelineConfig, evaluation: Option<&RunEvaluation>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let idx = keypoint_index(run);

    write_rows(
        &dir.join("coarse.csv"),
        &["index", "x1", "y1", "x2", "y2", "score", "ssim"],
        run.coarse.iter().map(|m| {
            vec![
                idx(&m.kp).to_string(),
                m.kp.x.to_string(),
                m.kp.y.to_string(),
                m.tgt_x.to_string(),
                m.tgt_y.to_string(),
                m.score.to_string(),
                m.ssim.to_string(),
            ]
        }),
    )?;
    write_rows(&dir.join("fine.csv"), FINE_HEADER, run.fine.iter().map(|m| fine_row(idx(&m.kp), m)))?;
    write_rows(&dir.join("inliers.csv"), FINE_HEADER, run.inliers().into_iter().map(|m| fine_row(idx(&m.kp), m)))?;

    let converged = run.converged().count();
    let model = run.ransac.as_ref().map(|r| &r.model);
    let summary = serde_json::json!({
        "schema": 1,
        "image": { "width": run.pc_ref.width(), "height": run.pc_ref.height() },
        "counts": {
            "keypoints": run.keypoints.len(),
            "coarse": run.coarse.len(),
            "refined": run.fine.len(),
            "converged": converged,
            "inliers": run.inliers().len(),
        },
        "convergence_fraction": if run.fine.is_empty() { 0.0 } else { converged as f64 / run.fine.len() as f64 },
        "model": model,
        "evaluation": evaluation.map(|e| serde_json::json!({
            "coarse": report_json(&e.coarse),
            "fine": report_json(&e.fine),
            "inliers": report_json(&e.inliers),
            "convergence_rate": e.convergence_rate,
        })),
        "timings_ms": run.timings,
        "config": cfg.to_kv_string(),
    });
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

fn report_json(r: &EvalReport) -> serde_json::Value {
    serde_json::json!({
        "ncm": r.ncm,
        "total": r.total,
        "cmr": r.cmr,
        "rmse": r.rmse,
        "failure": r.failure,
    })
}
