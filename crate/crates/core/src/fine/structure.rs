//! Mutual-structure consistency between two co-registered windows.

use crate::coarse::PairStats;

/// Values of the mean patch dissimilarity below this are treated as zero.
const MS_FLOOR: f64 = 1e-12;

/// Symmetric two-way regression residual between two patches.
///
/// Regressing either patch linearly on the other leaves a mean squared
/// residual of `var * (1 - rho²)`; the sum of both directions is
/// `(var_g + var_i) * (1 - rho²)`, zero exactly when the patches are
/// linearly related. A flat patch has `rho = 0`.
pub fn mutual_structure(gp: &[f64], ip: &[f64]) -> f64 {
    assert_eq!(gp.len(), ip.len(), "patches differ in size");
    assert!(gp.len() >= 2);
    let s = PairStats::new(gp, ip);
    ms_from_moments(s.var_g, s.var_i, s.cov)
}

#[inline]
fn ms_from_moments(var_g: f64, var_i: f64, cov: f64) -> f64 {
    let denom = var_g * var_i;
    let rho2 = if denom > 0.0 { (cov * cov / denom).min(1.0) } else { 0.0 };
    ((var_g + var_i) * (1.0 - rho2)).max(0.0)
}

/// Box sums over an `n`×`n` grid, truncated at the edges.
struct BoxSums {
    n: usize,
    table: Vec<f64>,
}

impl BoxSums {
    fn new(values: impl Iterator<Item = f64>, n: usize) -> Self {
        let stride = n + 1;
        let mut table = vec![0.0; stride * stride];
        let v: Vec<f64> = values.collect();
        for y in 0..n {
            let mut run = 0.0;
            for x in 0..n {
                run += v[y * n + x];
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + run;
            }
        }
        BoxSums { n, table }
    }

    /// Sum and count over the `size`×`size` box centred on `(x, y)`.
    #[inline]
    fn around(&self, x: usize, y: usize, half: usize) -> (f64, f64) {
        let s = self.n + 1;
        let x0 = x.saturating_sub(half);
        let y0 = y.saturating_sub(half);
        let x1 = (x + half + 1).min(self.n);
        let y1 = (y + half + 1).min(self.n);
        let t = &self.table;
        let sum = t[y1 * s + x1] - t[y0 * s + x1] - t[y1 * s + x0] + t[y0 * s + x0];
        (sum, ((x1 - x0) * (y1 - y0)) as f64)
    }
}

/// Per-pixel structural mismatch for two `n`×`n` windows: the mutual
/// structure of the `patch`×`patch` patch at each pixel, averaged again over
/// a `patch`×`patch` neighbourhood. Patches are truncated at window edges.
pub fn mean_mutual_structure(g_win: &[f64], i_win: &[f64], n: usize, patch: usize) -> Vec<f64> {
    assert_eq!(g_win.len(), n * n);
    assert_eq!(i_win.len(), n * n);
    let half = patch / 2;
    let sg = BoxSums::new(g_win.iter().copied(), n);
    let si = BoxSums::new(i_win.iter().copied(), n);
    let sgg = BoxSums::new(g_win.iter().map(|v| v * v), n);
    let sii = BoxSums::new(i_win.iter().map(|v| v * v), n);
    let sgi = BoxSums::new(g_win.iter().zip(i_win).map(|(a, b)| a * b), n);

    let mut ms = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            let (a, cnt) = sg.around(x, y, half);
            let (b, _) = si.around(x, y, half);
            let (aa, _) = sgg.around(x, y, half);
            let (bb, _) = sii.around(x, y, half);
            let (ab, _) = sgi.around(x, y, half);
            let (mg, mi) = (a / cnt, b / cnt);
            let var_g = (aa / cnt - mg * mg).max(0.0);
            let var_i = (bb / cnt - mi * mi).max(0.0);
            let cov = ab / cnt - mg * mi;
            ms.push(ms_from_moments(var_g, var_i, cov));
        }
    }
    let sms = BoxSums::new(ms.into_iter(), n);
    let mut out = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            let (s, cnt) = sms.around(x, y, half);
            out.push((s / cnt).max(0.0));
        }
    }
    out
}

/// Observation weights in `(0, 1]` from the mean mutual structure:
/// `w = 1 / (1 + ms / s)` with `s` the window median of `ms`. Consistent
/// pixels get weights near 1; when every pixel is consistent all weights are 1.
pub fn structure_weights(g_win: &[f64], i_win: &[f64], n: usize, patch: usize) -> Vec<f64> {
    let ms = mean_mutual_structure(g_win, i_win, n, patch);
    weights_from_ms(&ms)
}

pub(crate) fn weights_from_ms(ms: &[f64]) -> Vec<f64> {
    let mut sorted = ms.to_vec();
    let mid = sorted.len() / 2;
    let (_, med, _) = sorted.select_nth_unstable_by(mid, f64::total_cmp);
    let scale = med.max(MS_FLOOR);
    ms.iter()
        .map(|&m| if m <= MS_FLOOR { 1.0 } else { 1.0 / (1.0 + m / scale) })
        .collect()
}
