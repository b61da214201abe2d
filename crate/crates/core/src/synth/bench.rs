use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::filter::blur_normalized;
use crate::image::{attenuate, build_affine_matrix, warp, AffineParams, DecayMap, ImageGrid};
use crate::rng::{derive_seed, rng_from_seed};

use super::decay::decay_with_intensity;
use super::perlin::perlin_field;

/// Spatial pattern of the beam damage in the damage benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DamageNoiseType {
    /// Radial wells ("black holes") plus weak Gaussian field noise.
    GaussianBlackhole,
    /// Low-frequency Perlin pattern.
    Perlin,
    /// Lightly smoothed white noise.
    Random,
}

impl DamageNoiseType {
    pub const ALL: [DamageNoiseType; 3] = [Self::GaussianBlackhole, Self::Perlin, Self::Random];

    pub fn name(&self) -> &'static str {
        match self {
            Self::GaussianBlackhole => "gaussian",
            Self::Perlin => "perlin",
            Self::Random => "random",
        }
    }
}

impl fmt::Display for DamageNoiseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DamageNoiseType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "gaussian_blackhole" => Ok(Self::GaussianBlackhole),
            "perlin" => Ok(Self::Perlin),
            "random" => Ok(Self::Random),
            other => Err(Error::InvalidParameter(format!(
                "unknown damage noise type '{other}' (expected gaussian, perlin or random)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DamageFrame {
    pub frame: ImageGrid,
    pub decay: DecayMap,
    /// Ground-truth mean damage `mean(1 − λ)`.
    pub intensity: f64,
}

/// Damage pattern (larger = more loss) before intensity calibration.
fn damage_shape(kind: DamageNoiseType, height: usize, width: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    Ok(match kind {
        DamageNoiseType::GaussianBlackhole => {
            let wells = rng.random_range(1..=3usize);
            let params: Vec<(f64, f64, f64, f64)> = (0..wells)
                .map(|_| {
                    let amp = 0.5 + 0.5 * rng.random::<f64>();
                    let sigma = 8.0 + 24.0 * rng.random::<f64>();
                    let cx = rng.random::<f64>() * (width as f64 - 1.0);
                    let cy = rng.random::<f64>() * (height as f64 - 1.0);
                    (amp, sigma, cx, cy)
                })
                .collect();
            let mut out = Vec::with_capacity(height * width);
            for r in 0..height {
                for c in 0..width {
                    let well: f64 = params
                        .iter()
                        .map(|(a, s, cx, cy)| {
                            let d2 = (c as f64 - cx).powi(2) + (r as f64 - cy).powi(2);
                            a * (-d2 / (2.0 * s * s)).exp()
                        })
                        .sum();
                    let z: f64 = rng.sample(StandardNormal);
                    out.push((well - 0.05 * z).clamp(0.0, 1.0));
                }
            }
            out
        }
        DamageNoiseType::Perlin => perlin_field(height, width, 4, 3, seed)?.into_vec(),
        DamageNoiseType::Random => {
            let white: Vec<f64> = (0..height * width).map(|_| rng.random::<f64>()).collect();
            blur_normalized(&white, height, width, 1.0)
        }
    })
}

/// Degradation-only sequence: frame `k` is `λ_k ⊙ x0` with mean damage
/// `max_intensity · k / (n_frames − 1)` and no geometric transform.
pub fn gen_damage_benchmark(
    x0: &ImageGrid,
    kind: DamageNoiseType,
    n_frames: usize,
    max_intensity: f64,
    seed: u64,
) -> Result<Vec<DamageFrame>> {
    if n_frames < 2 {
        return Err(Error::InvalidParameter("damage benchmark needs >= 2 frames".into()));
    }
    if !(max_intensity > 0.0 && max_intensity <= 1.0) {
        return Err(Error::OutOfRange {
            what: "max_intensity",
            value: max_intensity,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let (h, w) = x0.dims();
    let shape = damage_shape(kind, h, w, seed)?;
    (0..n_frames)
        .map(|k| {
            let intensity = max_intensity * k as f64 / (n_frames - 1) as f64;
            let decay = if k == 0 {
                DecayMap::ones(h, w)
            } else {
                decay_with_intensity(&shape, h, w, intensity)?
            };
            Ok(DamageFrame {
                frame: attenuate(x0, &decay)?,
                decay,
                intensity,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftCase {
    pub x0: ImageGrid,
    pub x_final: ImageGrid,
    pub truth: AffineParams,
}

/// Random crop of `img` and its rigidly drifted copy (no attenuation).
pub fn gen_drift_benchmark(
    img: &ImageGrid,
    rot_max_deg: f64,
    drift_max_px: f64,
    crop_size: usize,
    seed: u64,
) -> Result<DriftCase> {
    if !(0.0..180.0).contains(&rot_max_deg) || !(drift_max_px >= 0.0 && drift_max_px.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "drift box ({rot_max_deg}°, {drift_max_px} px) is invalid"
        )));
    }
    let margin = drift_max_px.ceil() as usize;
    let need = crop_size + 2 * margin;
    if crop_size == 0 || img.height() < need || img.width() < need {
        return Err(Error::Dimension {
            expected: format!("at least {need}x{need} to crop {crop_size} with margin {margin}"),
            actual: format!("{}x{}", img.height(), img.width()),
        });
    }
    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let row = rng.random_range(margin..=img.height() - crop_size - margin);
    let col = rng.random_range(margin..=img.width() - crop_size - margin);
    let mut sym = |max: f64| max * (2.0 * rng.random::<f64>() - 1.0);
    let truth = AffineParams::new(sym(rot_max_deg), sym(drift_max_px), sym(drift_max_px));
    let x0 = img.crop(row, col, crop_size, crop_size)?;
    let x_final = warp(&x0, &build_affine_matrix(&truth)?, 0.0)?;
    Ok(DriftCase { x0, x_final, truth })
}
