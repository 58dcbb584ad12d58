//! Phase congruency from a bank of frequency-domain Log-Gabor filters.
//!
//! For each orientation the even/odd responses of all scales are summed into
//! a local energy vector; the energy along the mean phase direction, minus
//! the absolute orthogonal component, is weighted by a sigmoid of the
//! frequency spread and normalized by the total amplitude. An optional
//! Rayleigh noise model subtracts a per-orientation energy floor.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{fft::Fft2Plan, Raster};

/// Frequency-spread sigmoid cutoff and gain.
const SPREAD_CUTOFF: f64 = 0.5;
const SPREAD_GAIN: f64 = 10.0;
/// Ratio of angular spacing to the angular Gaussian's standard deviation.
const THETA_SPACING_ON_SIGMA: f64 = 1.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// No noise compensation; the energy floor is zero.
    Off,
    /// Energy floor from a Rayleigh model of the noise amplitude.
    Rayleigh,
}

impl std::str::FromStr for NoiseMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(NoiseMode::Off),
            "rayleigh" => Ok(NoiseMode::Rayleigh),
            other => Err(Error::Parameter(format!("unknown noise mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseMode::Off => "off",
            NoiseMode::Rayleigh => "rayleigh",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcParams {
    pub n_scales: usize,
    pub n_orientations: usize,
    /// Wavelength of the smallest-scale filter, in pixels.
    pub min_wavelength: f64,
    /// Wavelength ratio between successive scales.
    pub scale_mult: f64,
    /// Log-Gaussian bandwidth: sigma of the radial Gaussian over its centre frequency.
    pub sigma_on_f: f64,
    /// Number of noise standard deviations above the mean used as the floor.
    pub k_noise: f64,
    pub noise_mode: NoiseMode,
    pub epsilon: f64,
}

impl Default for PcParams {
    fn default() -> Self {
        PcParams {
            n_scales: 4,
            n_orientations: 6,
            min_wavelength: 3.0,
            scale_mult: 2.1,
            sigma_on_f: 0.55,
            k_noise: 2.0,
            noise_mode: NoiseMode::Off,
            epsilon: 1e-4,
        }
    }
}

impl PcParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Parameter(m.to_string()));
        if self.n_scales < 1 {
            return bad("n_scales must be >= 1");
        }
        if self.n_orientations < 1 {
            return bad("n_orientations must be >= 1");
        }
        if !(self.min_wavelength >= 2.0) {
            return bad("min_wavelength must be >= 2");
        }
        if !(self.scale_mult > 1.0) {
            return bad("scale_mult must be > 1");
        }
        if !(self.sigma_on_f > 0.0 && self.sigma_on_f < 1.0) {
            return bad("sigma_on_f must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be > 0");
        }
        if !(self.k_noise.is_finite() && self.k_noise >= 0.0) {
            return bad("k_noise must be finite and >= 0");
        }
        Ok(())
    }

    /// Centre frequency (cycles/pixel) of scale `n`.
    pub fn center_frequency(&self, n: usize) -> f64 {
        1.0 / (self.min_wavelength * self.scale_mult.powi(n as i32))
    }

    /// Centre angle (radians) of orientation `o`.
    pub fn orientation_angle(&self, o: usize) -> f64 {
        o as f64 * PI / self.n_orientations as f64
    }

    fn theta_sigma(&self) -> f64 {
        PI / self.n_orientations as f64 / THETA_SPACING_ON_SIGMA
    }
}

/// Mean and standard deviation of a Rayleigh distribution with scale `sigma_g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayleighStats {
    pub mean: f64,
    pub std_dev: f64,
}

impl RayleighStats {
    pub fn from_sigma(sigma_g: f64) -> Self {
        RayleighStats {
            mean: sigma_g * (PI / 2.0).sqrt(),
            std_dev: sigma_g * ((4.0 - PI) / 2.0).sqrt(),
        }
    }

    /// `mean + k * std_dev`
    pub fn threshold(&self, k: f64) -> f64 {
        self.mean + k * self.std_dev
    }
}

/// Noise energy floor for one orientation from the amplitudes of its
/// smallest-scale filter.
///
/// The Rayleigh scale of the smallest-scale response is taken from the
/// median amplitude (`median = sigma * sqrt(2 ln 2)`), extrapolated to the
/// summed response over all scales with the geometric series of the filter
/// bandwidths, then turned into `mean + k * std_dev`.
pub fn estimate_noise_threshold(amplitudes: &[f64], p: &PcParams) -> f64 {
    if amplitudes.is_empty() {
        return 0.0;
    }
    let med = median(amplitudes);
    if !(med > 0.0) {
        return 0.0;
    }
    let tau = med / (2.0 * std::f64::consts::LN_2).sqrt();
    let inv = 1.0 / p.scale_mult;
    let total_tau = tau * (1.0 - inv.powi(p.n_scales as i32)) / (1.0 - inv);
    RayleighStats::from_sigma(total_tau).threshold(p.k_noise)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let hi = *m;
    if v.len() % 2 == 1 {
        hi
    } else {
        let lo = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Log-Gabor filters for one grid size, stored as separable radial (per
/// scale) and angular (per orientation) factors. The filter for `(n, o)` is
/// their pointwise product; all filters are real-valued and have zero DC.
pub struct FilterBank {
    width: usize,
    height: usize,
    params: PcParams,
    radial: Vec<Vec<f64>>,
    angular: Vec<Vec<f64>>,
}

/// Normalized frequency (cycles/pixel) of DFT bin `k` out of `n`.
#[inline]
fn bin_frequency(k: usize, n: usize) -> f64 {
    if k < n.div_ceil(2) {
        k as f64 / n as f64
    } else {
        (k as f64 - n as f64) / n as f64
    }
}

fn radial_gain(radius: f64, f0: f64, sigma_on_f: f64) -> f64 {
    if radius <= 0.0 {
        return 0.0;
    }
    let l = (radius / f0).ln();
    let s = sigma_on_f.ln();
    (-(l * l) / (2.0 * s * s)).exp()
}

fn angular_gain(theta: f64, theta0: f64, theta_sigma: f64) -> f64 {
    let ds = theta.sin() * theta0.cos() - theta.cos() * theta0.sin();
    let dc = theta.cos() * theta0.cos() + theta.sin() * theta0.sin();
    let dtheta = ds.atan2(dc).abs();
    (-(dtheta * dtheta) / (2.0 * theta_sigma * theta_sigma)).exp()
}

impl FilterBank {
    pub fn new(width: usize, height: usize, params: PcParams) -> Result<Self> {
        params.validate()?;
        if width < 16 || height < 16 {
            return Err(Error::Parameter(format!(
                "filter bank needs at least 16x16, got {width}x{height}"
            )));
        }
        let mut radius = Vec::with_capacity(width * height);
        let mut theta = Vec::with_capacity(width * height);
        for v in 0..height {
            let fy = bin_frequency(v, height);
            for u in 0..width {
                let fx = bin_frequency(u, width);
                radius.push((fx * fx + fy * fy).sqrt());
                // image rows grow downwards
                theta.push((-fy).atan2(fx));
            }
        }
        let radial = (0..params.n_scales)
            .map(|n| {
                let f0 = params.center_frequency(n);
                radius.iter().map(|&r| radial_gain(r, f0, params.sigma_on_f)).collect()
            })
            .collect();
        let ts = params.theta_sigma();
        let angular = (0..params.n_orientations)
            .map(|o| {
                let t0 = params.orientation_angle(o);
                theta.iter().map(|&t| angular_gain(t, t0, ts)).collect()
            })
            .collect();
        Ok(FilterBank {
            width,
            height,
            params,
            radial,
            angular,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn params(&self) -> &PcParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.radial.len() * self.angular.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The sampled filter grid for scale `n` and orientation `o`.
    pub fn filter(&self, n: usize, o: usize) -> Vec<f64> {
        self.radial[n]
            .iter()
            .zip(&self.angular[o])
            .map(|(r, a)| r * a)
            .collect()
    }

    /// Continuous gain of filter `(n, o)` at frequency `(fx, fy)` in
    /// cycles/pixel, with `fy` measured along image rows (downwards).
    pub fn gain_at(&self, n: usize, o: usize, fx: f64, fy: f64) -> f64 {
        let p = &self.params;
        let r = (fx * fx + fy * fy).sqrt();
        radial_gain(r, p.center_frequency(n), p.sigma_on_f)
            * angular_gain((-fy).atan2(fx), p.orientation_angle(o), p.theta_sigma())
    }

    /// Radial gain of scale `n` sampled on the grid.
    pub fn radial(&self, n: usize) -> &[f64] {
        &self.radial[n]
    }
}

/// Phase congruency map plus optional per-orientation diagnostics.
#[derive(Clone, Debug)]
pub struct PcMap {
    pub pc: Raster,
    /// Weighted, floored energy per orientation (same units as the numerator).
    pub orientation_energy: Option<Vec<Raster>>,
}

impl PcMap {
    pub fn raster(&self) -> &Raster {
        &self.pc
    }
}

impl From<Raster> for PcMap {
    fn from(pc: Raster) -> Self {
        PcMap {
            pc,
            orientation_energy: None,
        }
    }
}

struct OrientationResult {
    contribution: Vec<f64>,
    sum_amplitude: Vec<f64>,
}

/// Computes the phase congruency map of `img`.
pub fn compute_pc(img: &Raster, p: &PcParams) -> Result<PcMap> {
    let bank = FilterBank::new(img.width(), img.height(), *p)?;
    compute_pc_with_bank(img, &bank, false)
}

/// As [`compute_pc`] with a prebuilt bank; `diagnostics` keeps the
/// per-orientation energy grids.
pub fn compute_pc_with_bank(img: &Raster, bank: &FilterBank, diagnostics: bool) -> Result<PcMap> {
    let (w, h) = (img.width(), img.height());
    if w < 32 || h < 32 {
        return Err(Error::Parameter(format!(
            "phase congruency needs at least 32x32, got {w}x{h}"
        )));
    }
    if bank.width != w || bank.height != h {
        return Err(Error::Parameter("filter bank size does not match image".into()));
    }
    let p = bank.params;
    let plan = Fft2Plan::new(w, h);
    let mut spectrum: Vec<Complex64> = img.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.forward(&mut spectrum);

    let per_orientation: Vec<OrientationResult> = (0..p.n_orientations)
        .into_par_iter()
        .map(|o| orientation_energy(&spectrum, bank, &plan, o))
        .collect();

    let n = w * h;
    let mut numerator = vec![0.0; n];
    let mut denominator = vec![0.0; n];
    for r in &per_orientation {
        for i in 0..n {
            numerator[i] += r.contribution[i];
            denominator[i] += r.sum_amplitude[i];
        }
    }
    let pc: Vec<f64> = numerator
        .iter()
        .zip(&denominator)
        .map(|(&num, &den)| (num / (den + p.epsilon)).clamp(0.0, 1.0))
        .collect();

    let orientation_energy = diagnostics.then(|| {
        per_orientation
            .iter()
            .map(|r| Raster::from_fn(w, h, |x, y| r.contribution[y * w + x]))
            .collect()
    });
    Ok(PcMap {
        pc: Raster::new(w, h, pc)?,
        orientation_energy,
    })
}

fn orientation_energy(spectrum: &[Complex64], bank: &FilterBank, plan: &Fft2Plan, o: usize) -> OrientationResult {
    let p = &bank.params;
    let n = spectrum.len();
    let eps = p.epsilon;
    let mut responses: Vec<Vec<Complex64>> = Vec::with_capacity(p.n_scales);
    let mut sum_e = vec![0.0; n];
    let mut sum_o = vec![0.0; n];
    let mut sum_an = vec![0.0; n];
    let mut max_an = vec![0.0f64; n];
    let mut threshold = 0.0;

    let angular = &bank.angular[o];
    for s in 0..p.n_scales {
        let radial = &bank.radial[s];
        let mut eo: Vec<Complex64> = spectrum
            .iter()
            .zip(radial.iter().zip(angular))
            .map(|(&c, (&r, &a))| c * (r * a))
            .collect();
        plan.inverse(&mut eo);
        let mut amplitudes = Vec::new();
        for (i, c) in eo.iter().enumerate() {
            let an = c.norm();
            sum_e[i] += c.re;
            sum_o[i] += c.im;
            sum_an[i] += an;
            max_an[i] = max_an[i].max(an);
            if s == 0 && p.noise_mode == NoiseMode::Rayleigh {
                amplitudes.push(an);
            }
        }
        if s == 0 && p.noise_mode == NoiseMode::Rayleigh {
            threshold = estimate_noise_threshold(&amplitudes, p);
        }
        responses.push(eo);
    }

    let mut contribution = vec![0.0; n];
    for i in 0..n {
        let x_energy = (sum_e[i] * sum_e[i] + sum_o[i] * sum_o[i]).sqrt() + eps;
        let mean_e = sum_e[i] / x_energy;
        let mean_o = sum_o[i] / x_energy;
        let mut energy = 0.0;
        for r in &responses {
            let (e, od) = (r[i].re, r[i].im);
            energy += e * mean_e + od * mean_o - (e * mean_o - od * mean_e).abs();
        }
        let weight = if p.n_scales > 1 {
            let spread = (sum_an[i] / (max_an[i] + eps) - 1.0) / (p.n_scales as f64 - 1.0);
            1.0 / (1.0 + ((SPREAD_CUTOFF - spread) * SPREAD_GAIN).exp())
        } else {
            1.0
        };
        contribution[i] = (energy * weight - threshold).max(0.0);
    }
    OrientationResult {
        contribution,
        sum_amplitude: sum_an,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rayleigh_worked_values() {
        let s = RayleighStats::from_sigma(1.0);
        assert!((s.mean - 1.2533).abs() < 1e-4);
        assert!((s.std_dev - 0.6551).abs() < 1e-4);
        assert!((s.threshold(2.0) - 2.5636).abs() < 1e-4);
        assert!((s.threshold(3.0) - 3.2187).abs() < 1e-4);
        assert_eq!(RayleighStats::from_sigma(0.0).threshold(2.0), 0.0);
    }

    #[test]
    fn noise_threshold_from_amplitudes() {
        let p = PcParams::default();
        assert_eq!(estimate_noise_threshold(&[0.0; 10], &p), 0.0);
        assert_eq!(estimate_noise_threshold(&[], &p), 0.0);
        // a constant amplitude equal to the Rayleigh median of sigma = 1
        let med = (2.0 * std::f64::consts::LN_2).sqrt();
        let t = estimate_noise_threshold(&[med; 9], &p);
        let inv = 1.0 / p.scale_mult;
        let total = (1.0 - inv.powi(4)) / (1.0 - inv);
        assert!((t - RayleighStats::from_sigma(total).threshold(2.0)).abs() < 1e-12);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn params_validation() {
        assert!(PcParams::default().validate().is_ok());
        for bad in [
            PcParams { n_scales: 0, ..Default::default() },
            PcParams { n_orientations: 0, ..Default::default() },
            PcParams { min_wavelength: 1.5, ..Default::default() },
            PcParams { sigma_on_f: 1.0, ..Default::default() },
            PcParams { epsilon: 0.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn bank_shape_and_dc() {
        let bank = FilterBank::new(64, 48, PcParams::default()).unwrap();
        assert_eq!(bank.len(), 24);
        for n in 0..4 {
            for o in 0..6 {
                assert_eq!(bank.filter(n, o)[0], 0.0);
            }
        }
        assert!(FilterBank::new(8, 64, PcParams::default()).is_err());
    }

    #[test]
    fn unit_gain_at_centre() {
        let p = PcParams::default();
        let bank = FilterBank::new(64, 64, p).unwrap();
        for n in 0..p.n_scales {
            for o in 0..p.n_orientations {
                let f0 = p.center_frequency(n);
                let t = p.orientation_angle(o);
                // fy points down the rows, so the angle is measured against -fy
                let g = bank.gain_at(n, o, f0 * t.cos(), -f0 * t.sin());
                assert!((g - 1.0).abs() < 1e-12, "n={n} o={o} g={g}");
            }
        }
    }

    #[test]
    fn radial_gains_bounded_by_one() {
        let bank = FilterBank::new(64, 64, PcParams::default()).unwrap();
        for n in 0..4 {
            assert!(bank.radial(n).iter().all(|&g| (0.0..=1.0).contains(&g)));
        }
    }

    #[test]
    fn constant_image_has_no_congruency() {
        let pc = compute_pc(&Raster::filled(48, 40, 0.6), &PcParams::default()).unwrap();
        assert!(pc.pc.samples().iter().all(|&v| v <= 1e-6));
    }

    #[test]
    fn rejects_small_images() {
        assert!(compute_pc(&Raster::filled(31, 64, 0.0), &PcParams::default()).is_err());
    }
}
