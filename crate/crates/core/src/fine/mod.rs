//! Sub-pixel refinement of coarse matches.
//!
//! The reference window `G` and the target `I` are related by
//! `G(x', y') = r0 + r1 · I(f(x', y'))` with an affine `f` expressed in
//! window-relative coordinates around the coarse match. Each outer
//! iteration re-linearizes the model, weights pixels by their mutual
//! structure consistency, solves a weighted LAD update and applies it with
//! an SSIM-guarded step.

mod linearize;
mod structure;
mod wlad;

pub use linearize::{linearize, sample_window, LinearSystem, TargetField};
pub use structure::{mean_mutual_structure, mutual_structure, structure_weights};
pub use wlad::{weighted_least_squares, wlad_solve, ResidualScale, Row, WladOptions, WladSolution, N_PARAMS};

use serde::{Deserialize, Serialize};

use crate::coarse::{ssim, CoarseMatch, PairStats};
use crate::detect::Keypoint;
use crate::error::{Error, Result};
use crate::raster::{AffinePair, Raster};

/// Radiometric gain/offset plus affine geometry, in the order of the
/// linearized coefficient rows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    pub r0: f64,
    pub r1: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
}

impl Default for TransformParams {
    fn default() -> Self {
        Self::identity()
    }
}

impl TransformParams {
    pub fn identity() -> Self {
        TransformParams {
            r0: 0.0,
            r1: 1.0,
            a0: 0.0,
            a1: 1.0,
            a2: 0.0,
            b0: 0.0,
            b1: 0.0,
            b2: 1.0,
        }
    }

    pub fn to_array(&self) -> Row {
        [self.r0, self.r1, self.a0, self.a1, self.a2, self.b0, self.b1, self.b2]
    }

    pub fn from_array(x: Row) -> Self {
        TransformParams {
            r0: x[0],
            r1: x[1],
            a0: x[2],
            a1: x[3],
            a2: x[4],
            b0: x[5],
            b1: x[6],
            b2: x[7],
        }
    }

    /// `self + scale * delta`, coefficient-wise.
    pub fn stepped(&self, delta: &Row, scale: f64) -> Self {
        let mut x = self.to_array();
        for (v, d) in x.iter_mut().zip(delta) {
            *v += scale * d;
        }
        Self::from_array(x)
    }

    pub fn geometry(&self) -> AffinePair {
        AffinePair {
            a0: self.a0,
            a1: self.a1,
            a2: self.a2,
            b0: self.b0,
            b1: self.b1,
            b2: self.b2,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.a1 * self.b2 - self.a2 * self.b1
    }
}

/// When the mutual-structure weights are recomputed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MsRefresh {
    Once,
    Each,
}

impl std::str::FromStr for MsRefresh {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "once" => Ok(MsRefresh::Once),
            "each" => Ok(MsRefresh::Each),
            other => Err(Error::Parameter(format!("unknown ms refresh mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for MsRefresh {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MsRefresh::Once => "once",
            MsRefresh::Each => "each",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FineConfig {
    /// Odd side length of the refinement window.
    pub window_size: usize,
    /// Odd side length of the mutual-structure patch.
    pub ms_patch: usize,
    pub max_iters: usize,
    /// Translation update (pixels) below which iteration stops.
    pub shift_tol: f64,
    /// Minimum final SSIM for a match to count as converged.
    pub ssim_gate: f64,
    pub ms_refresh: MsRefresh,
    /// Initialize gain/offset by regressing the reference window on the target.
    pub init_radiometry: bool,
    pub irls_iters: usize,
    pub irls_tol: f64,
    pub residual_scale: ResidualScale,
}

impl Default for FineConfig {
    fn default() -> Self {
        FineConfig {
            window_size: 81,
            ms_patch: 5,
            max_iters: 20,
            shift_tol: 0.05,
            ssim_gate: 0.4,
            ms_refresh: MsRefresh::Each,
            init_radiometry: true,
            irls_iters: 10,
            irls_tol: 1e-6,
            residual_scale: ResidualScale::Adaptive,
        }
    }
}

impl FineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.window_size < 9 || self.window_size % 2 == 0 {
            return bad(format!("fine window must be odd and >= 9, got {}", self.window_size));
        }
        if self.ms_patch < 3 || self.ms_patch % 2 == 0 {
            return bad(format!("mutual-structure patch must be odd and >= 3, got {}", self.ms_patch));
        }
        if self.max_iters < 1 || self.irls_iters < 1 {
            return bad("iteration limits must be >= 1".into());
        }
        if !(self.shift_tol > 0.0) {
            return bad("shift tolerance must be > 0".into());
        }
        Ok(())
    }

    fn wlad_options(&self) -> WladOptions {
        WladOptions {
            max_iters: self.irls_iters,
            tol: self.irls_tol,
            scale: self.residual_scale,
        }
    }
}

/// Why a refinement ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FineStatus {
    Converged,
    /// Iteration limit reached before the shift tolerance.
    MaxIterations,
    /// Final SSIM below the gate or below the starting SSIM.
    SsimGate,
    /// The transformed window left the target raster.
    OutOfSupport,
    RankDeficient,
    /// Gain sign flip, excessive distortion or non-finite values.
    Diverged,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FineMatch {
    pub kp: Keypoint,
    pub tgt_x: f64,
    pub tgt_y: f64,
    pub params: TransformParams,
    pub iterations: usize,
    pub converged: bool,
    pub status: FineStatus,
    pub initial_ssim: f64,
    pub final_ssim: f64,
}

/// Admissible range of the affine determinant after convergence.
const DET_RANGE: (f64, f64) = (0.5, 2.0);
/// Step fractions tried per outer iteration.
const STEP_FRACTIONS: [f64; 4] = [1.0, 0.5, 0.25, 0.125];
/// Slack when comparing SSIM values that should be equal.
const SSIM_SLACK: f64 = 1e-9;

/// Refines coarse matches between one reference and one target PC map.
pub struct FineMatcher<'a> {
    reference: &'a Raster,
    field: TargetField,
    cfg: FineConfig,
}

impl<'a> FineMatcher<'a> {
    pub fn new(reference: &'a Raster, target: &Raster, cfg: FineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(FineMatcher {
            reference,
            field: TargetField::new(target)?,
            cfg,
        })
    }

    pub fn config(&self) -> &FineConfig {
        &self.cfg
    }

    /// Refines one coarse match. Errors only when the reference window does
    /// not fit; every divergence is reported through `status`.
    pub fn refine(&self, coarse: &CoarseMatch) -> Result<FineMatch> {
        let cfg = &self.cfg;
        let n = cfg.window_size;
        let g = self.reference.window(coarse.kp.x as isize, coarse.kp.y as isize, n)?;
        let center = (coarse.tgt_x as f64, coarse.tgt_y as f64);

        let mut params = TransformParams::identity();
        let mut out = FineMatch {
            kp: coarse.kp,
            tgt_x: center.0,
            tgt_y: center.1,
            params,
            iterations: 0,
            converged: false,
            status: FineStatus::OutOfSupport,
            initial_ssim: f64::NAN,
            final_ssim: f64::NAN,
        };

        let Ok(start) = sample_window(&self.field, &params, center, n) else {
            return Ok(out);
        };
        let initial_ssim = ssim(&g, &start);
        out.initial_ssim = initial_ssim;
        out.final_ssim = initial_ssim;
        if cfg.init_radiometry {
            let s = PairStats::new(&g, &start);
            if s.var_i > 0.0 && s.cov > 0.0 {
                params.r1 = s.cov / s.var_i;
                params.r0 = s.mean_g - params.r1 * s.mean_i;
            }
        }

        let opts = cfg.wlad_options();
        let mut weights: Option<Vec<f64>> = None;
        let mut current_ssim = initial_ssim;
        let mut settled = false;
        let mut status = FineStatus::MaxIterations;
        for it in 1..=cfg.max_iters {
            out.iterations = it;
            let sys = match linearize(&g, &self.field, &params, center, n) {
                Ok(s) => s,
                Err(_) => {
                    status = FineStatus::OutOfSupport;
                    break;
                }
            };
            if weights.is_none() || cfg.ms_refresh == MsRefresh::Each {
                weights = Some(structure_weights(&g, &sys.sampled, n, cfg.ms_patch));
            }
            let sol = match wlad_solve(&sys.rows, &sys.observations, weights.as_deref().unwrap(), &opts) {
                Ok(s) => s,
                Err(Error::Rank) => {
                    status = FineStatus::RankDeficient;
                    break;
                }
                Err(_) => {
                    status = FineStatus::Diverged;
                    break;
                }
            };

            let mut step = None;
            for &frac in &STEP_FRACTIONS {
                let cand = params.stepped(&sol.x, frac);
                let Ok(win) = sample_window(&self.field, &cand, center, n) else {
                    continue;
                };
                let s = ssim(&g, &win);
                step = Some((cand, s, frac));
                if s >= current_ssim - SSIM_SLACK {
                    break;
                }
            }
            let Some((cand, s, frac)) = step else {
                status = FineStatus::OutOfSupport;
                break;
            };
            params = cand;
            current_ssim = s;
            if (frac * sol.x[2]).abs() < cfg.shift_tol && (frac * sol.x[5]).abs() < cfg.shift_tol {
                settled = true;
                break;
            }
        }

        out.params = params;
        out.final_ssim = current_ssim;
        out.tgt_x = center.0 + params.a0;
        out.tgt_y = center.1 + params.b0;
        let det = params.determinant();
        out.status = if !settled {
            status
        } else if !(params.r1 > 0.0) || !(DET_RANGE.0..=DET_RANGE.1).contains(&det) || !out.tgt_x.is_finite() {
            FineStatus::Diverged
        } else if current_ssim < cfg.ssim_gate || current_ssim < initial_ssim - SSIM_SLACK {
            FineStatus::SsimGate
        } else {
            FineStatus::Converged
        };
        out.converged = out.status == FineStatus::Converged;
        Ok(out)
    }
}

/// One-shot refinement; prefer [`FineMatcher`] for many matches.
pub fn refine(coarse: &CoarseMatch, pc_ref: &Raster, pc_tgt: &Raster, cfg: &FineConfig) -> Result<FineMatch> {
    FineMatcher::new(pc_ref, pc_tgt, *cfg)?.refine(coarse)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_array_round_trip() {
        let p = TransformParams { r0: 0.1, r1: 0.9, a0: 0.3, a1: 1.01, a2: 0.02, b0: -0.7, b1: -0.01, b2: 0.99 };
        assert_eq!(TransformParams::from_array(p.to_array()), p);
        assert!((p.determinant() - (1.01 * 0.99 + 0.02 * 0.01)).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(FineConfig::default().validate().is_ok());
        assert!(FineConfig { window_size: 8, ..Default::default() }.validate().is_err());
        assert!(FineConfig { ms_patch: 4, ..Default::default() }.validate().is_err());
        assert!(FineConfig { max_iters: 0, ..Default::default() }.validate().is_err());
    }
}
