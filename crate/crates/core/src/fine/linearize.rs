use super::{wlad::Row, TransformParams};
use crate::error::Result;
use crate::raster::{gradient_central, BicubicTap, Raster};

/// A target PC map together with its central-difference gradients.
#[derive(Clone, Debug)]
pub struct TargetField {
    pub values: Raster,
    pub grad_x: Raster,
    pub grad_y: Raster,
}

impl TargetField {
    pub fn new(pc_tgt: &Raster) -> Result<Self> {
        let (grad_x, grad_y) = gradient_central(pc_tgt)?;
        Ok(TargetField {
            values: pc_tgt.clone(),
            grad_x,
            grad_y,
        })
    }

    fn tap(&self, x: f64, y: f64) -> Result<BicubicTap> {
        BicubicTap::new(self.values.width(), self.values.height(), x, y)
    }
}

/// Linearized observation equations of one window.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    /// Coefficient rows `c1..c8`, one per window pixel, row-major.
    pub rows: Vec<Row>,
    /// `G - (r0 + r1 I*)`.
    pub observations: Vec<f64>,
    /// `I*`: the target sampled at the transformed positions.
    pub sampled: Vec<f64>,
}

/// Window-relative pixel offsets in row-major order.
pub(crate) fn window_offsets(size: usize) -> impl Iterator<Item = (f64, f64)> {
    let half = (size / 2) as i64;
    (-half..=half).flat_map(move |y| (-half..=half).map(move |x| (x as f64, y as f64)))
}

/// Builds the observation equations for the reference window `g_win`
/// (`size`×`size`, row-major) against the target around `center`.
///
/// Pixel `(x', y')` of the window maps to `center + (a0 + a1 x' + a2 y',
/// b0 + b1 x' + b2 y')` in the target. Fails with a domain error as soon as
/// a mapped position leaves the interpolation support.
pub fn linearize(g_win: &[f64], field: &TargetField, params: &TransformParams, center: (f64, f64), size: usize) -> Result<LinearSystem> {
    assert_eq!(g_win.len(), size * size);
    let p = params;
    let n = g_win.len();
    let mut rows = Vec::with_capacity(n);
    let mut observations = Vec::with_capacity(n);
    let mut sampled = Vec::with_capacity(n);
    for ((xo, yo), &g) in window_offsets(size).zip(g_win) {
        let tx = center.0 + p.a0 + p.a1 * xo + p.a2 * yo;
        let ty = center.1 + p.b0 + p.b1 * xo + p.b2 * yo;
        let tap = field.tap(tx, ty)?;
        let i = tap.apply(&field.values);
        let gx = p.r1 * tap.apply(&field.grad_x);
        let gy = p.r1 * tap.apply(&field.grad_y);
        rows.push([1.0, i, gx, gx * xo, gx * yo, gy, gy * xo, gy * yo]);
        observations.push(g - (p.r0 + p.r1 * i));
        sampled.push(i);
    }
    Ok(LinearSystem {
        rows,
        observations,
        sampled,
    })
}

/// Samples only the geometrically transformed target window.
pub fn sample_window(field: &TargetField, params: &TransformParams, center: (f64, f64), size: usize) -> Result<Vec<f64>> {
    let p = params;
    window_offsets(size)
        .map(|(xo, yo)| {
            let tx = center.0 + p.a0 + p.a1 * xo + p.a2 * yo;
            let ty = center.1 + p.b0 + p.b1 * xo + p.b2 * yo;
            Ok(field.tap(tx, ty)?.apply(&field.values))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn smooth(w: usize, h: usize) -> Raster {
        Raster::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            0.5 + 0.2 * (0.11 * x + 0.05 * y).sin() + 0.15 * (0.07 * y - 0.03 * x).cos()
        })
    }

    #[test]
    fn exact_model_has_zero_observations() {
        let r = smooth(48, 48);
        let field = TargetField::new(&r).unwrap();
        let g = r.window(24, 24, 11).unwrap();
        let sys = linearize(&g, &field, &TransformParams::identity(), (24.0, 24.0), 11).unwrap();
        assert!(sys.observations.iter().all(|v| v.abs() < 1e-14));
        assert_eq!(sys.rows.len(), 121);
    }

    #[test]
    fn flat_target_has_no_geometric_columns() {
        let field = TargetField::new(&Raster::filled(32, 32, 0.4)).unwrap();
        let g = vec![0.3; 81];
        let sys = linearize(&g, &field, &TransformParams::identity(), (16.0, 16.0), 9).unwrap();
        assert!(sys.rows.iter().all(|r| r[2..].iter().all(|&c| c == 0.0)));
        let w = vec![1.0; 81];
        assert!(matches!(
            super::super::wlad::weighted_least_squares(&sys.rows, &sys.observations, &w),
            Err(Error::Rank)
        ));
    }

    #[test]
    fn leaving_support_is_domain_error() {
        let field = TargetField::new(&smooth(32, 32)).unwrap();
        let g = vec![0.3; 81];
        let p = TransformParams { a0: 12.5, ..TransformParams::identity() };
        assert!(matches!(linearize(&g, &field, &p, (16.0, 16.0), 9), Err(Error::Domain { .. })));
    }

    #[test]
    fn offset_column_matches_finite_difference() {
        let r = smooth(64, 64);
        let field = TargetField::new(&r).unwrap();
        let g = r.window(30, 31, 15).unwrap();
        let p = TransformParams { r0: 0.02, r1: 0.9, a0: 0.3, b0: -0.2, ..TransformParams::identity() };
        let base = linearize(&g, &field, &p, (30.0, 31.0), 15).unwrap();
        let delta = 1e-3;
        let shifted = linearize(&g, &field, &TransformParams { a0: p.a0 + delta, ..p }, (30.0, 31.0), 15).unwrap();
        let (mut err, mut norm) = (0.0, 0.0);
        for (k, row) in base.rows.iter().enumerate() {
            let fd = shifted.observations[k] - base.observations[k];
            let want = -row[2] * delta;
            err += (fd - want).powi(2);
            norm += want * want;
        }
        assert!((err / norm).sqrt() < 1e-2);
    }
}
