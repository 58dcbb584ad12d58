use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::coarse::TemplateSpec;
use crate::detect::FastConfig;
use crate::error::{Error, Result};
use crate::fine::FineConfig;
use crate::phase::PcParams;

/// Every tunable of a matching run.
///
/// The text form is one `key = value` pair per line with keys equal to the
/// command-line flag names; blank lines and `#` comments are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub pc: PcParams,
    pub template: TemplateSpec,
    pub fine: FineConfig,
    /// Number of keypoints requested from the detector.
    pub features: usize,
    pub fast_threshold: f64,
    pub grid: (usize, usize),
    /// Coarse matches with a lower window SSIM are not refined.
    pub coarse_gate: f64,
    pub ransac_threshold: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            pc: PcParams::default(),
            template: TemplateSpec::default(),
            fine: FineConfig::default(),
            features: 1000,
            fast_threshold: 0.05,
            grid: (8, 8),
            coarse_gate: 0.15,
            ransac_threshold: 2.0,
            seed: 42,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Keys in serialization order.
pub const CONFIG_KEYS: &[&str] = &[
    "n-scales",
    "n-orientations",
    "min-wavelength",
    "scale-mult",
    "sigma-on-f",
    "k-noise",
    "noise-mode",
    "pc-epsilon",
    "features",
    "fast-threshold",
    "grid",
    "template-size",
    "search-radius",
    "metric",
    "coarse-gate",
    "window-size",
    "ms-patch",
    "max-iters",
    "shift-tol",
    "ssim-gate",
    "ms-refresh",
    "init-radiometry",
    "irls-iters",
    "irls-tol",
    "residual-scale",
    "ransac-threshold",
    "seed",
    "out",
];

/// The leading keys that configure phase congruency.
pub fn pc_keys() -> &'static [&'static str] {
    &CONFIG_KEYS[..8]
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parameter(format!("{key}: cannot parse '{value}'")))
}

impl PipelineConfig {
    pub fn get(&self, key: &str) -> Option<String> {
        let v = match key {
            "n-scales" => self.pc.n_scales.to_string(),
            "n-orientations" => self.pc.n_orientations.to_string(),
            "min-wavelength" => self.pc.min_wavelength.to_string(),
            "scale-mult" => self.pc.scale_mult.to_string(),
            "sigma-on-f" => self.pc.sigma_on_f.to_string(),
            "k-noise" => self.pc.k_noise.to_string(),
            "noise-mode" => self.pc.noise_mode.to_string(),
            "pc-epsilon" => self.pc.epsilon.to_string(),
            "features" => self.features.to_string(),
            "fast-threshold" => self.fast_threshold.to_string(),
            "grid" => format!("{}x{}", self.grid.0, self.grid.1),
            "template-size" => self.template.template_size.to_string(),
            "search-radius" => self.template.search_radius.to_string(),
            "metric" => self.template.metric.to_string(),
            "coarse-gate" => self.coarse_gate.to_string(),
            "window-size" => self.fine.window_size.to_string(),
            "ms-patch" => self.fine.ms_patch.to_string(),
            "max-iters" => self.fine.max_iters.to_string(),
            "shift-tol" => self.fine.shift_tol.to_string(),
            "ssim-gate" => self.fine.ssim_gate.to_string(),
            "ms-refresh" => self.fine.ms_refresh.to_string(),
            "init-radiometry" => self.fine.init_radiometry.to_string(),
            "irls-iters" => self.fine.irls_iters.to_string(),
            "irls-tol" => self.fine.irls_tol.to_string(),
            "residual-scale" => self.fine.residual_scale.to_string(),
            "ransac-threshold" => self.ransac_threshold.to_string(),
            "seed" => self.seed.to_string(),
            "out" => self.out_dir.display().to_string(),
            _ => return None,
        };
        Some(v)
    }

    /// Sets one field from its text form. Bounds are checked by [`validate`](Self::validate).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n-scales" => self.pc.n_scales = parse(key, value)?,
            "n-orientations" => self.pc.n_orientations = parse(key, value)?,
            "min-wavelength" => self.pc.min_wavelength = parse(key, value)?,
            "scale-mult" => self.pc.scale_mult = parse(key, value)?,
            "sigma-on-f" => self.pc.sigma_on_f = parse(key, value)?,
            "k-noise" => self.pc.k_noise = parse(key, value)?,
            "noise-mode" => self.pc.noise_mode = value.trim().parse()?,
            "pc-epsilon" => self.pc.epsilon = parse(key, value)?,
            "features" => self.features = parse(key, value)?,
            "fast-threshold" => self.fast_threshold = parse(key, value)?,
            "grid" => {
                let (a, b) = value
                    .trim()
                    .split_once('x')
                    .ok_or_else(|| Error::Parameter(format!("grid: expected COLSxROWS, got '{value}'")))?;
                self.grid = (parse(key, a)?, parse(key, b)?);
            }
            "template-size" => self.template.template_size = parse(key, value)?,
            "search-radius" => self.template.search_radius = parse(key, value)?,
            "metric" => self.template.metric = value.trim().parse()?,
            "coarse-gate" => self.coarse_gate = parse(key, value)?,
            "window-size" => self.fine.window_size = parse(key, value)?,
            "ms-patch" => self.fine.ms_patch = parse(key, value)?,
            "max-iters" => self.fine.max_iters = parse(key, value)?,
            "shift-tol" => self.fine.shift_tol = parse(key, value)?,
            "ssim-gate" => self.fine.ssim_gate = parse(key, value)?,
            "ms-refresh" => self.fine.ms_refresh = value.trim().parse()?,
            "init-radiometry" => self.fine.init_radiometry = parse(key, value)?,
            "irls-iters" => self.fine.irls_iters = parse(key, value)?,
            "irls-tol" => self.fine.irls_tol = parse(key, value)?,
            "residual-scale" => self.fine.residual_scale = value.trim().parse()?,
            "ransac-threshold" => self.ransac_threshold = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out_dir = PathBuf::from(value.trim()),
            _ => return Err(Error::Parameter(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.pc.validate()?;
        self.template.validate()?;
        self.fine.validate()?;
        let bad = |m: &str| Err(Error::Parameter(m.to_string()));
        if self.features == 0 {
            return bad("features must be >= 1");
        }
        if !(self.fast_threshold >= 0.0) {
            return bad("fast-threshold must be >= 0");
        }
        if self.grid.0 == 0 || self.grid.1 == 0 {
            return bad("grid dimensions must be >= 1");
        }
        if !(self.ransac_threshold > 0.0) {
            return bad("ransac-threshold must be > 0");
        }
        if !self.coarse_gate.is_finite() {
            return bad("coarse-gate must be finite");
        }
        Ok(())
    }

    pub fn fast_config(&self) -> FastConfig {
        FastConfig {
            threshold: self.fast_threshold,
            target_count: self.features,
            grid: self.grid,
            margin: FastConfig::margin_for_windows(self.template.template_size, self.fine.window_size),
        }
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(s, "{key} = {}", self.get(key).expect("every listed key is readable"));
        }
        s
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_kv_str(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("config line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_kv_str(text)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_kv_string()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_fixed_point() {
        let mut c = PipelineConfig::default();
        c.set("min-wavelength", "3.3").unwrap();
        c.set("noise-mode", "rayleigh").unwrap();
        c.set("grid", "4x6").unwrap();
        c.set("shift-tol", "0.1").unwrap();
        let text = c.to_kv_string();
        let back = PipelineConfig::from_kv_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_kv_string(), text);
    }

    #[test]
    fn every_key_is_settable() {
        let d = PipelineConfig::default();
        for key in CONFIG_KEYS {
            let mut c = PipelineConfig::default();
            c.set(key, &d.get(key).unwrap()).unwrap();
            assert_eq!(c, d, "{key}");
        }
    }

    #[test]
    fn comments_and_errors() {
        let c = PipelineConfig::from_kv_str("# run\nmetric = ncc  # coarse\n\nseed=7\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.template.metric, crate::coarse::Metric::Ncc);
        assert!(PipelineConfig::from_kv_str("bogus = 1").is_err());
        assert!(PipelineConfig::from_kv_str("seed").is_err());
        assert!(PipelineConfig::from_kv_str("seed = x").is_err());
    }

    #[test]
    fn pc_keys_are_the_pc_block() {
        assert_eq!(pc_keys().first(), Some(&"n-scales"));
        assert_eq!(pc_keys().last(), Some(&"pc-epsilon"));
    }

    #[test]
    fn defaults_validate() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(c.fast_config().margin, 52);
    }
}
