use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{degrade_forward, AffineParams, DecayMap, ImageGrid};
use crate::rng::{derive_seed, rng_from_seed};

use super::decay::{interpolate_affine, interpolate_decay, make_final_decay};
use super::noise::{add_noise, NoiseConfig};
use super::perlin::perlin_field;

/// Final state of a synthetic degradation sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationSpec {
    pub lambda_final: DecayMap,
    pub affine_final: AffineParams,
    pub total_steps: u32,
    pub noise: NoiseConfig,
}

impl DegradationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 {
            return Err(Error::InvalidParameter("total steps must be >= 1".into()));
        }
        self.affine_final.validate()?;
        self.noise.validate()
    }
}

/// One training triple: noisy end frames, the clean intermediate target and
/// the factors that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub x0_clean: ImageGrid,
    pub x0_noisy: ImageGrid,
    pub xt_noisy_final: ImageGrid,
    pub xt_clean: ImageGrid,
    pub t: u32,
    pub total_steps: u32,
    pub lambda_t: DecayMap,
    pub affine_t: AffineParams,
}

/// Renders step `t` of `spec` applied to `x0`. The two inputs get
/// independent noise draws; the supervision target stays clean.
pub fn gen_sequence_sample(x0: &ImageGrid, spec: &DegradationSpec, t: u32, seed: u64) -> Result<SequenceSample> {
    spec.validate()?;
    let lambda_t = interpolate_decay(&spec.lambda_final, t as f64, spec.total_steps)?;
    let affine_t = interpolate_affine(&spec.affine_final, t as f64, spec.total_steps)?;
    let xt_clean = degrade_forward(x0, &lambda_t, &affine_t, 0.0)?;
    let x_final = degrade_forward(x0, &spec.lambda_final, &spec.affine_final, 0.0)?;
    Ok(SequenceSample {
        x0_clean: x0.clone(),
        x0_noisy: add_noise(x0, &spec.noise, derive_seed(seed, 0))?,
        xt_noisy_final: add_noise(&x_final, &spec.noise, derive_seed(seed, 1))?,
        xt_clean,
        t,
        total_steps: spec.total_steps,
        lambda_t,
        affine_t,
    })
}

/// Ranges from which random final states are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpecSampler {
    /// Final rotation drawn from `U(-theta_max, theta_max)`, degrees.
    pub theta_max_deg: f64,
    /// Final translation per axis drawn from `U(-shift_max, shift_max)`, pixels.
    pub shift_max_px: f64,
    /// `s_min` of the final decay drawn uniformly from this range.
    pub min_survival: [f64; 2],
    pub decay_cells: usize,
    pub decay_octaves: usize,
    pub total_steps: u32,
    pub noise: NoiseConfig,
}

impl Default for SpecSampler {
    fn default() -> Self {
        Self {
            theta_max_deg: 5.0,
            shift_max_px: 5.0,
            min_survival: [0.1, 0.6],
            decay_cells: 3,
            decay_octaves: 3,
            total_steps: 10,
            noise: NoiseConfig::default(),
        }
    }
}

impl SpecSampler {
    pub fn sample(&self, height: usize, width: usize, seed: u64) -> Result<DegradationSpec> {
        let [slo, shi] = self.min_survival;
        if !(0.0..1.0).contains(&slo) || !(0.0..1.0).contains(&shi) || slo > shi {
            return Err(Error::InvalidParameter(format!(
                "min survival range [{slo}, {shi}] must be ordered inside [0, 1)"
            )));
        }
        let mut rng = rng_from_seed(derive_seed(seed, 0));
        let mut sym = |max: f64| max * (2.0 * rng.random::<f64>() - 1.0);
        let affine_final = AffineParams::new(
            sym(self.theta_max_deg),
            sym(self.shift_max_px),
            sym(self.shift_max_px),
        );
        let s_min = slo + (shi - slo) * rng.random::<f64>();
        let field = perlin_field(height, width, self.decay_cells, self.decay_octaves, derive_seed(seed, 1))?;
        let spec = DegradationSpec {
            lambda_final: make_final_decay(&field, s_min)?,
            affine_final,
            total_steps: self.total_steps,
            noise: self.noise,
        };
        spec.validate()?;
        Ok(spec)
    }
}
