use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::Correspondence;
use crate::error::{Error, Result};

/// A rank-2 fundamental matrix with unit Frobenius norm, relating
/// homogeneous points as `x2ᵀ H x1 = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundamentalMatrix {
    h: [[f64; 3]; 3],
}

/// Squared line normals below this are treated as degenerate.
const LINE_NORMAL_EPS: f64 = 1e-24;

impl FundamentalMatrix {
    /// Projects `m` onto rank 2, scales it to unit Frobenius norm and fixes
    /// the sign so that the entry of largest magnitude is positive.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite fundamental matrix"));
        }
        let svd = m.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut s = svd.singular_values;
        s[2] = 0.0;
        let mut r = u * Matrix3::from_diagonal(&s) * vt;
        let norm = r.norm();
        if norm < 1e-300 {
            return Err(Error::Estimation("fundamental matrix vanished".into()));
        }
        r /= norm;
        let lead = r.iter().copied().fold(0.0_f64, |a, v| if v.abs() > a.abs() { v } else { a });
        if lead < 0.0 {
            r = -r;
        }
        Ok(FundamentalMatrix { h: to_rows(&r) })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.h[i][j])
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        self.h
    }

    /// Epipolar line `H x1` in the second image as `(l1, l2, l3)`.
    pub fn line(&self, x1: f64, y1: f64) -> [f64; 3] {
        let l = self.matrix() * Vector3::new(x1, y1, 1.0);
        [l[0], l[1], l[2]]
    }

    /// Normalized eight-point estimate from at least 8 correspondences.
    pub fn estimate(matches: &[Correspondence]) -> Result<Self> {
        if matches.len() < 8 {
            return Err(Error::Estimation(format!(
                "fundamental matrix needs at least 8 matches, got {}",
                matches.len()
            )));
        }
        let t1 = normalizer(matches.iter().map(|m| (m.x1, m.y1)))?;
        let t2 = normalizer(matches.iter().map(|m| (m.x2, m.y2)))?;
        // Zero rows keep the thin SVD square when exactly 8 points are given.
        let rows = matches.len().max(9);
        let mut a = DMatrix::<f64>::zeros(rows, 9);
        for (k, m) in matches.iter().enumerate() {
            let p = t1 * Vector3::new(m.x1, m.y1, 1.0);
            let q = t2 * Vector3::new(m.x2, m.y2, 1.0);
            for i in 0..3 {
                for j in 0..3 {
                    a[(k, 3 * i + j)] = q[i] * p[j];
                }
            }
        }
        let svd = a.svd(false, true);
        let vt = svd.v_t.ok_or(Error::Numeric("SVD failed"))?;
        let (imin, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let f = Matrix3::from_fn(|i, j| vt[(imin, 3 * i + j)]);
        Self::from_matrix(t2.transpose() * f * t1)
    }

    /// Perpendicular distance of `x2` to the epipolar line of `x1`.
    pub fn distance(&self, m: &Correspondence) -> Option<f64> {
        epipolar_residual(self, m).map(|r| r[0].hypot(r[1]))
    }
}

fn to_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [
        [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
        [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
        [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
    ]
}

/// Similarity moving the centroid to the origin with mean distance √2.
fn normalizer(points: impl Iterator<Item = (f64, f64)> + Clone) -> Result<Matrix3<f64>> {
    let n = points.clone().count() as f64;
    let (sx, sy) = points.clone().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (cx, cy) = (sx / n, sy / n);
    let mean_d = points.map(|p| (p.0 - cx).hypot(p.1 - cy)).sum::<f64>() / n;
    if !(mean_d > 0.0) {
        return Err(Error::Estimation("all points coincide".into()));
    }
    let s = std::f64::consts::SQRT_2 / mean_d;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

/// Displacement from the foot of the perpendicular on `line` to `p`.
/// `None` when the line normal vanishes.
pub fn point_line_residual(line: [f64; 3], p: (f64, f64)) -> Option<[f64; 2]> {
    let [a, b, c] = line;
    let nn = a * a + b * b;
    if !(nn > LINE_NORMAL_EPS) {
        return None;
    }
    let d = (a * p.0 + b * p.1 + c) / nn;
    Some([d * a, d * b])
}

/// Residual of the second point of `m` with respect to its epipolar line.
pub fn epipolar_residual(h: &FundamentalMatrix, m: &Correspondence) -> Option<[f64; 2]> {
    point_line_residual(h.line(m.x1, m.y1), (m.x2, m.y2))
}
