use std::sync::Arc;

use rustfft::{num_complex::Complex64, Fft, FftPlanner};

use super::Raster;

/// Row-major complex grid produced by [`dft2`].
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub width: usize,
    pub height: usize,
    pub bins: Vec<Complex64>,
}

/// Reusable row/column plans for one grid size.
pub(crate) struct Fft2Plan {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2Plan {
    pub(crate) fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2Plan {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            col_fwd: planner.plan_fft_forward(height),
            row_inv: planner.plan_fft_inverse(width),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn run(&self, data: &mut [Complex64], rows: &dyn Fft<f64>, cols: &dyn Fft<f64>) {
        let (w, h) = (self.width, self.height);
        debug_assert_eq!(data.len(), w * h);
        rows.process(data);
        let mut col = vec![Complex64::new(0.0, 0.0); h];
        for x in 0..w {
            for y in 0..h {
                col[y] = data[y * w + x];
            }
            cols.process(&mut col);
            for y in 0..h {
                data[y * w + x] = col[y];
            }
        }
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(data, self.row_fwd.as_ref(), self.col_fwd.as_ref());
    }

    /// Inverse transform including the `1/(w·h)` normalization.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, self.row_inv.as_ref(), self.col_inv.as_ref());
        let scale = 1.0 / (self.width * self.height) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Forward 2-D discrete Fourier transform (unnormalized).
pub fn dft2(r: &Raster) -> Spectrum {
    let plan = Fft2Plan::new(r.width(), r.height());
    let mut bins: Vec<Complex64> = r.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.forward(&mut bins);
    Spectrum {
        width: r.width(),
        height: r.height(),
        bins,
    }
}

/// Inverse of [`dft2`]; the imaginary part of the result is discarded.
pub fn idft2(s: &Spectrum) -> Raster {
    let plan = Fft2Plan::new(s.width, s.height);
    let mut data = s.bins.clone();
    plan.inverse(&mut data);
    Raster::from_fn(s.width, s.height, |x, y| data[y * s.width + x].re)
}
