use super::Raster;
use crate::error::{Error, Result};

/// Catmull-Rom weights for taps at offsets -1, 0, 1, 2 from `floor(x)`,
/// with `t = x - floor(x)`.
#[inline]
pub fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// A resolved 4×4 interpolation footprint. Computing it once lets several
/// rasters of the same size (an image and its gradients) share the kernel.
#[derive(Clone, Copy, Debug)]
pub struct BicubicTap {
    x0: usize,
    y0: usize,
    wx: [f64; 4],
    wy: [f64; 4],
}

impl BicubicTap {
    /// Resolves the footprint for `(x, y)`; requires full 4×4 support, i.e.
    /// `x` in `[1.5, width - 2.5]` and likewise for `y`.
    #[inline]
    pub fn new(width: usize, height: usize, x: f64, y: f64) -> Result<Self> {
        if !(x >= 1.5 && y >= 1.5 && x <= width as f64 - 2.5 && y <= height as f64 - 2.5) {
            return Err(Error::Domain { x, y });
        }
        let fx = x.floor();
        let fy = y.floor();
        Ok(BicubicTap {
            x0: fx as usize - 1,
            y0: fy as usize - 1,
            wx: catmull_rom_weights(x - fx),
            wy: catmull_rom_weights(y - fy),
        })
    }

    #[inline]
    pub fn apply(&self, r: &Raster) -> f64 {
        let w = r.width();
        let s = r.samples();
        let mut acc = 0.0;
        for (j, &wy) in self.wy.iter().enumerate() {
            let base = (self.y0 + j) * w + self.x0;
            let row = &s[base..base + 4];
            acc += wy * (row[0] * self.wx[0] + row[1] * self.wx[1] + row[2] * self.wx[2] + row[3] * self.wx[3]);
        }
        acc
    }
}

/// Catmull-Rom bicubic sample at a real-valued position.
pub fn sample_bicubic(r: &Raster, x: f64, y: f64) -> Result<f64> {
    Ok(BicubicTap::new(r.width(), r.height(), x, y)?.apply(r))
}

/// Bicubic sample that clamps the footprint to the raster edge instead of
/// failing. Used for synthesis, never for estimation.
pub fn sample_bicubic_clamped(r: &Raster, x: f64, y: f64) -> f64 {
    let fx = x.floor();
    let fy = y.floor();
    let wx = catmull_rom_weights(x - fx);
    let wy = catmull_rom_weights(y - fy);
    let (ix, iy) = (fx as isize, fy as isize);
    let mut acc = 0.0;
    for (j, &wyj) in wy.iter().enumerate() {
        let mut row = 0.0;
        for (i, &wxi) in wx.iter().enumerate() {
            row += wxi * r.get_clamped(ix - 1 + i as isize, iy - 1 + j as isize);
        }
        acc += wyj * row;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes() {
        let r = Raster::from_fn(8, 8, |x, y| ((x * 7 + y * 3) % 5) as f64 * 0.1);
        assert_eq!(sample_bicubic(&r, 3.0, 4.0).unwrap(), r.get(3, 4));
    }

    #[test]
    fn reproduces_constants_and_ramps() {
        let c = Raster::filled(8, 8, 0.42);
        let v = sample_bicubic(&c, 3.37, 4.81).unwrap();
        assert!((v - 0.42).abs() < 1e-14);

        let ramp = Raster::from_fn(8, 8, |x, _| x as f64);
        assert!((sample_bicubic(&ramp, 2.5, 3.0).unwrap() - 2.5).abs() < 1e-14);
        let plane = Raster::from_fn(8, 8, |x, y| 0.3 * x as f64 - 0.7 * y as f64 + 1.0);
        let (x, y) = (4.21, 2.93);
        let want = 0.3 * x - 0.7 * y + 1.0;
        assert!((sample_bicubic(&plane, x, y).unwrap() - want).abs() < 1e-13);
    }

    #[test]
    fn weights_partition_unity() {
        for k in 0..=10 {
            let w = catmull_rom_weights(k as f64 / 10.0);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn out_of_support_is_domain_error() {
        let r = Raster::filled(8, 8, 0.0);
        assert!(matches!(sample_bicubic(&r, 1.0, 4.0), Err(Error::Domain { .. })));
        assert!(sample_bicubic(&r, 5.6, 4.0).is_err());
        assert!(sample_bicubic(&r, 1.5, 5.5).is_ok());
        assert!(sample_bicubic(&r, f64::NAN, 4.0).is_err());
    }

    #[test]
    fn clamped_matches_strict_inside() {
        let r = Raster::from_fn(9, 9, |x, y| ((x * x + 3 * y) % 7) as f64);
        let a = sample_bicubic(&r, 4.3, 3.9).unwrap();
        let b = sample_bicubic_clamped(&r, 4.3, 3.9);
        assert!((a - b).abs() < 1e-14);
    }
}
