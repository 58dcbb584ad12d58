use std::path::Path;

use super::TruthFile;
use crate::error::Result;
use crate::eval::{ransac_model, read_matches_csv, Correspondence, Model, ModelKind, RansacConfig, Truth};

/// Resolves a truth argument for scoring `matches`:
///
/// - `fundamental`: a fundamental matrix fitted robustly to the matches;
/// - `affine`: an affine map fitted robustly to the matches;
/// - a `.json` path: a synthesis truth file;
/// - any other path: a match CSV whose `x2, y2` columns are the true
///   target positions, row for row.
pub fn resolve_truth(arg: &str, matches: &[Correspondence], ransac: &RansacConfig) -> Result<Truth> {
    match arg {
        "fundamental" => {
            let r = ransac_model(matches, ModelKind::Fundamental, ransac)?;
            let Model::Fundamental(h) = r.model else { unreachable!() };
            Ok(Truth::Fundamental(h))
        }
        "affine" => {
            let r = ransac_model(matches, ModelKind::Affine, ransac)?;
            let Model::Affine(t) = r.model else { unreachable!() };
            Ok(Truth::KnownTransform(t))
        }
        path if path.ends_with(".json") => Ok(Truth::KnownTransform(TruthFile::load(Path::new(path))?.spec.transform)),
        path => {
            let pts = read_matches_csv(Path::new(path))?;
            Ok(Truth::GroundTruthPoints(pts.iter().map(|p| (p.x2, p.y2)).collect()))
        }
    }
}
