use serde::{Deserialize, Serialize};

use super::{interp::sample_bicubic_clamped, BicubicTap, Raster};
use crate::error::{Error, Result};

/// Affine map `(x, y) -> (a0 + a1 x + a2 y, b0 + b1 x + b2 y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinePair {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
}

impl Default for AffinePair {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl AffinePair {
    pub const IDENTITY: AffinePair = AffinePair {
        a0: 0.0,
        a1: 1.0,
        a2: 0.0,
        b0: 0.0,
        b1: 0.0,
        b2: 1.0,
    };

    pub fn translation(dx: f64, dy: f64) -> Self {
        AffinePair {
            a0: dx,
            b0: dy,
            ..Self::IDENTITY
        }
    }

    /// Coefficients in `[a0, a1, a2, b0, b1, b2]` order.
    pub fn from_coeffs(c: [f64; 6]) -> Self {
        AffinePair {
            a0: c[0],
            a1: c[1],
            a2: c[2],
            b0: c[3],
            b1: c[4],
            b2: c[5],
        }
    }

    pub fn coeffs(&self) -> [f64; 6] {
        [self.a0, self.a1, self.a2, self.b0, self.b1, self.b2]
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.a0 + self.a1 * x + self.a2 * y,
            self.b0 + self.b1 * x + self.b2 * y,
        )
    }

    pub fn determinant(&self) -> f64 {
        self.a1 * self.b2 - self.a2 * self.b1
    }

    pub fn inverse(&self) -> Result<AffinePair> {
        let det = self.determinant();
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(Error::Parameter(format!("affine map is singular (det = {det:e})")));
        }
        let (i11, i12) = (self.b2 / det, -self.a2 / det);
        let (i21, i22) = (-self.b1 / det, self.a1 / det);
        Ok(AffinePair {
            a0: -(i11 * self.a0 + i12 * self.b0),
            a1: i11,
            a2: i12,
            b0: -(i21 * self.a0 + i22 * self.b0),
            b1: i21,
            b2: i22,
        })
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &AffinePair) -> AffinePair {
        let (a0, b0) = self.apply(other.a0, other.b0);
        AffinePair {
            a0,
            a1: self.a1 * other.a1 + self.a2 * other.b1,
            a2: self.a1 * other.a2 + self.a2 * other.b2,
            b0,
            b1: self.b1 * other.a1 + self.b2 * other.b1,
            b2: self.b1 * other.a2 + self.b2 * other.b2,
        }
    }
}

/// Output of [`warp_affine`]: the resampled raster and a per-pixel flag that
/// is `true` where the source footprint had full bicubic support.
#[derive(Clone, Debug)]
pub struct Warped {
    pub raster: Raster,
    pub valid: Vec<bool>,
}

/// Resamples `r` so that output pixel `(x, y)` takes the value of `r` at
/// `t(x, y)`. Pixels whose footprint leaves the raster are filled from the
/// clamped border and flagged invalid.
pub fn warp_affine(r: &Raster, t: &AffinePair) -> Result<Warped> {
    let det = t.determinant();
    if !det.is_finite() || det.abs() < 1e-12 {
        return Err(Error::Parameter(format!("affine map is singular (det = {det:e})")));
    }
    let (w, h) = (r.width(), r.height());
    let mut valid = Vec::with_capacity(w * h);
    let raster = Raster::from_fn(w, h, |x, y| {
        let (sx, sy) = t.apply(x as f64, y as f64);
        match BicubicTap::new(w, h, sx, sy) {
            Ok(tap) => {
                valid.push(true);
                tap.apply(r)
            }
            Err(_) => {
                valid.push(false);
                sample_bicubic_clamped(r, sx, sy)
            }
        }
    });
    Ok(Warped { raster, valid })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth(w: usize, h: usize) -> Raster {
        Raster::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            0.5 + 0.25 * (0.21 * x).sin() * (0.17 * y).cos() + 0.1 * (0.05 * (x + 2.0 * y)).sin()
        })
    }

    #[test]
    fn identity_reproduces_valid_pixels() {
        let r = smooth(32, 24);
        let out = warp_affine(&r, &AffinePair::IDENTITY).unwrap();
        for (i, (&a, &b)) in out.raster.samples().iter().zip(r.samples()).enumerate() {
            if out.valid[i] {
                assert_eq!(a, b);
            }
        }
        assert!(out.valid.iter().filter(|&&v| v).count() > 20 * 14);
    }

    #[test]
    fn half_pixel_shift_on_ramp() {
        let r = Raster::from_fn(16, 16, |x, _| x as f64);
        let out = warp_affine(&r, &AffinePair::translation(0.5, 0.0)).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                if out.valid[y * 16 + x] {
                    assert!((out.raster.get(x, y) - (x as f64 + 0.5)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn round_trip_shift() {
        let r = smooth(64, 64);
        let t = AffinePair::translation(0.3, -0.7);
        let fwd = warp_affine(&r, &t).unwrap();
        let back = warp_affine(&fwd.raster, &t.inverse().unwrap()).unwrap();
        let mut sse = 0.0;
        let mut n = 0;
        for y in 6..58 {
            for x in 6..58 {
                let d = back.raster.get(x, y) - r.get(x, y);
                sse += d * d;
                n += 1;
            }
        }
        let rms = (sse / n as f64).sqrt();
        assert!(rms < 1e-3, "rms {rms}");
    }

    #[test]
    fn singular_rejected() {
        let t = AffinePair::from_coeffs([0.0, 1.0, 2.0, 0.0, 2.0, 4.0]);
        assert!(warp_affine(&Raster::filled(8, 8, 0.0), &t).is_err());
        assert!(t.inverse().is_err());
    }

    #[test]
    fn inverse_and_compose() {
        let t = AffinePair::from_coeffs([1.5, 1.01, 0.02, -2.0, -0.03, 0.98]);
        let id = t.compose(&t.inverse().unwrap());
        for (a, b) in id.coeffs().iter().zip(AffinePair::IDENTITY.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
