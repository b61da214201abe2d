use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::rng::rng_from_seed;

/// STEM acquisition noise: shot noise, scan-line jitter, detector readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Expected electron counts per unit intensity.
    pub dose: f64,
    /// Per-scanline horizontal offset std-dev, pixels.
    pub jitter_sigma: f64,
    /// Additive Gaussian std-dev, intensity units.
    pub readout_sigma: f64,
    pub poisson_enabled: bool,
    pub jitter_enabled: bool,
    pub readout_enabled: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            dose: 200.0,
            jitter_sigma: 0.5,
            readout_sigma: 0.01,
            poisson_enabled: true,
            jitter_enabled: true,
            readout_enabled: true,
        }
    }
}

impl NoiseConfig {
    pub fn disabled() -> Self {
        Self {
            poisson_enabled: false,
            jitter_enabled: false,
            readout_enabled: false,
            ..Self::default()
        }
    }

    pub fn is_disabled(&self) -> bool {
        !(self.poisson_enabled || self.jitter_enabled || self.readout_enabled)
    }

    pub fn validate(&self) -> Result<()> {
        if self.poisson_enabled && !(self.dose.is_finite() && self.dose > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dose must be finite and > 0, got {}",
                self.dose
            )));
        }
        for (name, v) in [("jitter", self.jitter_sigma), ("readout", self.readout_sigma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} sigma must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Parses `none`, `default`, or a comma list such as
/// `dose=200,jitter=0.5,readout=0.01`. Listed components are enabled; a
/// zero sigma disables its component. Unlisted components stay off.
impl FromStr for NoiseConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "none" | "off" | "" => return Ok(Self::disabled()),
            "default" => return Ok(Self::default()),
            _ => {}
        }
        let mut cfg = Self::disabled();
        for part in s.split(',') {
            let (key, value) = part.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("noise component '{part}' is not key=value"))
            })?;
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::InvalidParameter(format!("noise value '{value}' is not a number"))
            })?;
            match key.trim() {
                "dose" => {
                    cfg.dose = value;
                    cfg.poisson_enabled = true;
                }
                "jitter" => {
                    cfg.jitter_sigma = value;
                    cfg.jitter_enabled = value != 0.0;
                }
                "readout" => {
                    cfg.readout_sigma = value;
                    cfg.readout_enabled = value != 0.0;
                }
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown noise component '{other}'"
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for NoiseConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.poisson_enabled {
            parts.push(format!("dose={}", self.dose));
        }
        if self.jitter_enabled {
            parts.push(format!("jitter={}", self.jitter_sigma));
        }
        if self.readout_enabled {
            parts.push(format!("readout={}", self.readout_sigma));
        }
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

/// Applies Poisson shot noise, then per-row jitter, then readout noise, and
/// clips to non-negative. Deterministic per seed.
pub fn add_noise(img: &ImageGrid, cfg: &NoiseConfig, seed: u64) -> Result<ImageGrid> {
    cfg.validate()?;
    if cfg.is_disabled() {
        return Ok(img.clone());
    }
    let (h, w) = img.dims();
    let mut rng = rng_from_seed(seed);
    let mut data = img.as_slice().to_vec();

    if cfg.poisson_enabled {
        for v in &mut data {
            let mean = cfg.dose * *v;
            *v = if mean > 0.0 {
                let counts: f64 = Poisson::new(mean)
                    .map_err(|e| Error::InvalidParameter(format!("poisson mean {mean}: {e}")))?
                    .sample(&mut rng);
                counts / cfg.dose
            } else {
                0.0
            };
        }
    }

    if cfg.jitter_enabled && cfg.jitter_sigma > 0.0 {
        let mut line = vec![0.0; w];
        for r in 0..h {
            let z: f64 = rng.sample(StandardNormal);
            let shift = cfg.jitter_sigma * z;
            let row = &mut data[r * w..(r + 1) * w];
            for (c, out) in line.iter_mut().enumerate() {
                *out = sample_row(row, c as f64 - shift);
            }
            row.copy_from_slice(&line);
        }
    }

    if cfg.readout_enabled && cfg.readout_sigma > 0.0 {
        for v in &mut data {
            let z: f64 = rng.sample(StandardNormal);
            *v += cfg.readout_sigma * z;
        }
    }

    ImageGrid::from_clamped(h, w, data)
}

fn sample_row(row: &[f64], x: f64) -> f64 {
    let x0 = x.floor();
    let f = x - x0;
    let i = x0 as isize;
    let get = |j: isize| {
        if j >= 0 && (j as usize) < row.len() {
            row[j as usize]
        } else {
            0.0
        }
    };
    get(i) * (1.0 - f) + get(i + 1) * f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> ImageGrid {
        ImageGrid::from_fn(32, 32, |r, c| ((r * 32 + c) % 97) as f64 / 97.0).unwrap()
    }

    #[test]
    fn disabled_is_identity() {
        let img = ramp();
        assert_eq!(add_noise(&img, &NoiseConfig::disabled(), 4).unwrap(), img);
    }

    #[test]
    fn huge_dose_converges() {
        let img = ramp();
        let cfg = NoiseConfig {
            dose: 1e9,
            jitter_enabled: false,
            readout_enabled: false,
            ..Default::default()
        };
        let noisy = add_noise(&img, &cfg, 9).unwrap();
        assert!(noisy.mean_abs_diff(&img).unwrap() < 1e-3);
    }

    #[test]
    fn poisson_variance_is_mean_over_dose() {
        let img = ImageGrid::filled(256, 256, 0.5);
        let cfg = NoiseConfig {
            dose: 100.0,
            jitter_enabled: false,
            readout_enabled: false,
            ..Default::default()
        };
        let noisy = add_noise(&img, &cfg, 1).unwrap();
        let mean = noisy.mean();
        let var = noisy.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / (noisy.len() - 1) as f64;
        assert!((var - 0.005).abs() / 0.005 < 0.2, "variance {var}");
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn deterministic_and_non_negative() {
        let img = ramp();
        let cfg = NoiseConfig::default();
        let a = add_noise(&img, &cfg, 3).unwrap();
        assert_eq!(a, add_noise(&img, &cfg, 3).unwrap());
        assert_ne!(a, add_noise(&img, &cfg, 4).unwrap());
        assert!(a.as_slice().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn parse_and_display() {
        let cfg: NoiseConfig = "dose=200,jitter=0.5,readout=0.01".parse().unwrap();
        assert_eq!(cfg, NoiseConfig::default());
        assert_eq!(cfg.to_string().parse::<NoiseConfig>().unwrap(), cfg);
        assert!("none".parse::<NoiseConfig>().unwrap().is_disabled());
        let only_jitter: NoiseConfig = "jitter=1".parse().unwrap();
        assert!(only_jitter.jitter_enabled && !only_jitter.poisson_enabled);
        assert!("dose=0".parse::<NoiseConfig>().is_err());
        assert!("dose=abc".parse::<NoiseConfig>().is_err());
        assert!("gain=2".parse::<NoiseConfig>().is_err());
        assert!("readout=-1".parse::<NoiseConfig>().is_err());
    }
}
