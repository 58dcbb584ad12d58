use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{sample_bicubic_clamped, warp_affine, AffinePair, Raster};

/// Pointwise intensity change applied after warping: optional inversion,
/// then `v^gamma`, then `gain * v + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Radiometric {
    pub gamma: f64,
    pub gain: f64,
    pub offset: f64,
    pub invert: bool,
}

impl Default for Radiometric {
    fn default() -> Self {
        Radiometric {
            gamma: 1.0,
            gain: 1.0,
            offset: 0.0,
            invert: false,
        }
    }
}

impl Radiometric {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Parameter(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.gain.is_finite() && self.offset.is_finite()) {
            return Err(Error::Parameter("gain and offset must be finite".into()));
        }
        Ok(())
    }

    pub fn apply(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, 1.0);
        let v = if self.invert { 1.0 - v } else { v };
        self.gain * v.powf(self.gamma) + self.offset
    }
}

/// Everything needed to reproduce a synthetic target from its source.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Maps reference coordinates to target coordinates.
    pub transform: AffinePair,
    pub radiometric: Radiometric,
    /// Standard deviation of additive Gaussian noise on the unit scale.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            transform: AffinePair::IDENTITY,
            radiometric: Radiometric::default(),
            noise_sigma: 0.0,
            seed: 42,
        }
    }
}

/// Truth file written next to a synthetic pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub schema: u32,
    pub width: usize,
    pub height: usize,
    #[serde(flatten)]
    pub spec: SynthSpec,
}

impl TruthFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Resamples `source` through `spec.transform`, applies the intensity map,
/// adds seeded Gaussian noise and clamps to `[0, 1]`. Target pixels whose
/// preimage leaves the interpolation support are filled from the clamped
/// sampler.
pub fn synthesize(source: &Raster, spec: &SynthSpec) -> Result<(Raster, TruthFile)> {
    spec.radiometric.validate()?;
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::Parameter(format!("noise sigma must be >= 0, got {}", spec.noise_sigma)));
    }
    let inverse = spec.transform.inverse()?;
    let warped = warp_affine(source, &inverse)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = (spec.noise_sigma > 0.0).then(|| Normal::new(0.0, spec.noise_sigma).expect("sigma checked"));
    let (w, h) = (source.width(), source.height());
    let mut out = Vec::with_capacity(w * h);
    for &v in warped.raster.samples() {
        let mut v = spec.radiometric.apply(v);
        if let Some(n) = &noise {
            v += n.sample(&mut rng);
        }
        out.push(v.clamp(0.0, 1.0));
    }
    let truth = TruthFile {
        schema: 1,
        width: w,
        height: h,
        spec: *spec,
    };
    Ok((Raster::new(w, h, out)?, truth))
}

/// Seeded textured scene in `[0, 1]`: fractal value noise plus a scatter of
/// bright and dark rectangles and discs.
pub fn synthetic_scene(width: usize, height: usize, seed: u64) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0; width * height];
    let mut amp = 1.0;
    let mut cell = (width.max(height) as f64 / 4.0).max(4.0);
    while cell >= 2.0 {
        let gw = (width as f64 / cell).ceil() as usize + 4;
        let gh = (height as f64 / cell).ceil() as usize + 4;
        let grid = Raster::from_fn(gw, gh, |_, _| rng.gen::<f64>());
        for y in 0..height {
            for x in 0..width {
                let v = sample_bicubic_clamped(&grid, x as f64 / cell + 1.5, y as f64 / cell + 1.5);
                acc[y * width + x] += amp * v;
            }
        }
        amp *= 0.6;
        cell /= 2.0;
    }
    let shapes = (width * height / 2000).max(4);
    for _ in 0..shapes {
        let cx = rng.gen_range(0.0..width as f64);
        let cy = rng.gen_range(0.0..height as f64);
        let r = rng.gen_range(3.0..(width.min(height) as f64 / 10.0).max(4.0));
        let level = if rng.gen_bool(0.5) { 1.2 } else { -1.2 };
        let disc = rng.gen_bool(0.5);
        let (x0, x1) = ((cx - r).max(0.0) as usize, ((cx + r) as usize + 1).min(width));
        let (y0, y1) = ((cy - r).max(0.0) as usize, ((cy + r) as usize + 1).min(height));
        for y in y0..y1 {
            for x in x0..x1 {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                if !disc || dx * dx + dy * dy <= r * r {
                    acc[y * width + x] += level;
                }
            }
        }
    }
    let (lo, hi) = acc.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v)));
    let span = (hi - lo).max(1e-12);
    Raster::new(width, height, acc.into_iter().map(|v| (v - lo) / span).collect()).expect("finite scene")
}
