//! Scalar image containers and the pixel-level operations built on them.
//!
//! A [`Raster`] is a row-major grid of `f64` samples. Images are normalized
//! to `[0, 1]` on load; phase-congruency maps and weight grids share the
//! same container.

pub(crate) mod fft;
mod interp;
mod io;
mod warp;

pub use fft::{dft2, idft2, Spectrum};
pub use interp::{catmull_rom_weights, sample_bicubic, sample_bicubic_clamped, BicubicTap};
pub use io::{load_gray, load_pcw, save_pcw, save_png16};
pub use warp::{warp_affine, AffinePair, Warped};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl Raster {
    /// Wraps a row-major sample vector. Fails if the length does not match
    /// the dimensions or any sample is non-finite.
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "raster dimensions must be positive, got {width}x{height}"
            )));
        }
        if samples.len() != width * height {
            return Err(Error::Parameter(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height,
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("raster sample"));
        }
        Ok(Raster {
            width,
            height,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0 && value.is_finite());
        Raster {
            width,
            height,
            samples: vec![value; width * height],
        }
    }

    /// Builds a raster by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0);
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                assert!(v.is_finite(), "non-finite sample at ({x}, {y})");
                samples.push(v);
            }
        }
        Raster {
            width,
            height,
            samples,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.samples[y * self.width + x]
    }

    /// Sample with coordinates clamped to the raster edge.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.samples[cy * self.width + cx]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[f64] {
        &self.samples[y * self.width..(y + 1) * self.width]
    }

    /// Applies `f` to every sample. Panics if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Raster {
        let samples: Vec<f64> = self.samples.iter().map(|&v| f(v)).collect();
        assert!(samples.iter().all(|v| v.is_finite()));
        Raster {
            width: self.width,
            height: self.height,
            samples,
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// True if a `size`×`size` window centred on `(cx, cy)` lies fully inside.
    pub fn window_fits(&self, cx: isize, cy: isize, size: usize) -> bool {
        let half = (size / 2) as isize;
        cx - half >= 0
            && cy - half >= 0
            && cx + half < self.width as isize
            && cy + half < self.height as isize
    }

    /// Copies the `size`×`size` window centred on `(cx, cy)` in row-major order.
    pub fn window(&self, cx: isize, cy: isize, size: usize) -> Result<Vec<f64>> {
        if !self.window_fits(cx, cy, size) {
            return Err(Error::WindowOutOfBounds);
        }
        let half = (size / 2) as isize;
        let x0 = (cx - half) as usize;
        let mut out = Vec::with_capacity(size * size);
        for y in (cy - half)..=(cy + half) {
            let row = self.row(y as usize);
            out.extend_from_slice(&row[x0..x0 + size]);
        }
        Ok(out)
    }
}

/// Central-difference gradients `(d/dx, d/dy)`; one-sided differences on the
/// outermost rows and columns.
pub fn gradient_central(r: &Raster) -> Result<(Raster, Raster)> {
    let (w, h) = (r.width(), r.height());
    if w < 3 || h < 3 {
        return Err(Error::Parameter(format!(
            "gradient needs at least 3x3 pixels, got {w}x{h}"
        )));
    }
    let gx = Raster::from_fn(w, h, |x, y| {
        if x == 0 {
            r.get(1, y) - r.get(0, y)
        } else if x == w - 1 {
            r.get(w - 1, y) - r.get(w - 2, y)
        } else {
            0.5 * (r.get(x + 1, y) - r.get(x - 1, y))
        }
    });
    let gy = Raster::from_fn(w, h, |x, y| {
        if y == 0 {
            r.get(x, 1) - r.get(x, 0)
        } else if y == h - 1 {
            r.get(x, h - 1) - r.get(x, h - 2)
        } else {
            0.5 * (r.get(x, y + 1) - r.get(x, y - 1))
        }
    });
    Ok((gx, gy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_lengths_and_nan() {
        assert!(Raster::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Raster::new(2, 1, vec![0.0, f64::NAN]).is_err());
        assert!(Raster::new(0, 1, vec![]).is_err());
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let r = Raster::filled(5, 4, 0.3);
        let (gx, gy) = gradient_central(&r).unwrap();
        assert!(gx.samples().iter().chain(gy.samples()).all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_of_ramp() {
        let r = Raster::from_fn(6, 5, |x, _| 2.0 * x as f64);
        let (gx, gy) = gradient_central(&r).unwrap();
        for y in 0..5 {
            for x in 1..5 {
                assert_eq!(gx.get(x, y), 2.0);
            }
        }
        assert!(gy.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_of_squares_row() {
        let r = Raster::new(3, 3, vec![1.0, 4.0, 9.0, 1.0, 4.0, 9.0, 1.0, 4.0, 9.0]).unwrap();
        let (gx, _) = gradient_central(&r).unwrap();
        assert_eq!(gx.get(1, 1), 4.0);
        assert_eq!(gx.get(0, 1), 3.0);
        assert_eq!(gx.get(2, 1), 5.0);
    }

    #[test]
    fn gradient_rejects_small() {
        assert!(gradient_central(&Raster::filled(2, 5, 0.0)).is_err());
    }

    #[test]
    fn window_extraction() {
        let r = Raster::from_fn(5, 5, |x, y| (y * 5 + x) as f64);
        let w = r.window(2, 2, 3).unwrap();
        assert_eq!(w, vec![6.0, 7.0, 8.0, 11.0, 12.0, 13.0, 16.0, 17.0, 18.0]);
        assert!(r.window(1, 2, 5).is_err());
        assert!(r.window(2, 2, 5).is_ok());
    }
}
