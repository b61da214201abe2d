//! Trial loops for the damage-curve and drift benchmarks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::Estimator;
use crate::image::ImageGrid;
use crate::metrics::{damage_intensity, drift_error, regression_report, rotation_error, RegressionReport};
use crate::rng::derive_seed;
use crate::synth::{gen_atom_map, gen_damage_benchmark, gen_drift_benchmark, AtomMapSpec, DamageNoiseType};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageBenchConfig {
    pub noise_type: DamageNoiseTypeName,
    pub frames: usize,
    pub max_intensity: f64,
    pub trials: usize,
    /// Side of the square atom map generated for each trial.
    pub image_size: usize,
    pub seed: u64,
}

/// Serializable name of a [`DamageNoiseType`].
pub type DamageNoiseTypeName = String;

impl DamageBenchConfig {
    pub fn new(kind: DamageNoiseType, trials: usize, seed: u64) -> Self {
        Self {
            noise_type: kind.name().to_string(),
            frames: 10,
            max_intensity: 0.9,
            trials,
            image_size: 128,
            seed,
        }
    }
}

/// Predicted and true intensity curves of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct DamageTrial {
    pub predicted: Vec<f64>,
    pub truth: Vec<f64>,
    pub report: RegressionReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DamageBenchResult {
    pub trials: Vec<DamageTrial>,
    pub mean: RegressionReport,
}

/// Each trial draws a fresh atom map and damage pattern, estimates every
/// frame against frame 0 and scores the damage-intensity curve.
pub fn run_damage_benchmark(cfg: &DamageBenchConfig, estimator: &dyn Estimator) -> Result<DamageBenchResult> {
    let kind: DamageNoiseType = cfg.noise_type.parse()?;
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let steps = (cfg.frames.max(2) - 1) as u32;
    let mut trials = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let trial_seed = derive_seed(cfg.seed, trial as u64);
        let spec = AtomMapSpec {
            seed: derive_seed(trial_seed, 0),
            ..AtomMapSpec::default()
        };
        let x0 = gen_atom_map(&spec, cfg.image_size, cfg.image_size)?;
        let frames = gen_damage_benchmark(&x0, kind, cfg.frames, cfg.max_intensity, derive_seed(trial_seed, 1))?;
        let mut predicted = Vec::with_capacity(frames.len());
        let mut truth = Vec::with_capacity(frames.len());
        for (k, f) in frames.iter().enumerate() {
            let est = estimator.estimate(&x0, &f.frame, k as f64, steps)?;
            predicted.push(damage_intensity(&est.decay)?);
            truth.push(f.intensity);
        }
        let report = regression_report(&predicted, &truth)?;
        trials.push(DamageTrial {
            predicted,
            truth,
            report,
        });
    }
    let reports: Vec<_> = trials.iter().map(|t| t.report).collect();
    let mean = RegressionReport::mean_of(&reports).expect("at least one trial");
    Ok(DamageBenchResult { trials, mean })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftBenchConfig {
    pub rot_max_deg: f64,
    pub drift_max_px: f64,
    pub crop: usize,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftBenchResult {
    pub mean_drift_err_px: f64,
    pub mean_rot_err_deg: f64,
    pub max_drift_err_px: f64,
    pub max_rot_err_deg: f64,
}

/// Side of the synthetic lattice image that holds every crop of `cfg`.
pub fn drift_source_size(cfg: &DriftBenchConfig) -> usize {
    cfg.crop + 2 * cfg.drift_max_px.ceil() as usize + 16
}

/// Runs `cfg.trials` random crops of `img` through the estimator.
pub fn run_drift_benchmark(img: &ImageGrid, cfg: &DriftBenchConfig, estimator: &dyn Estimator) -> Result<DriftBenchResult> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let mut out = DriftBenchResult {
        mean_drift_err_px: 0.0,
        mean_rot_err_deg: 0.0,
        max_drift_err_px: 0.0,
        max_rot_err_deg: 0.0,
    };
    for trial in 0..cfg.trials {
        let case = gen_drift_benchmark(
            img,
            cfg.rot_max_deg,
            cfg.drift_max_px,
            cfg.crop,
            derive_seed(cfg.seed, trial as u64),
        )?;
        let est = estimator.estimate(&case.x0, &case.x_final, 1.0, 1)?;
        let d = drift_error(&est.affine, &case.truth);
        let r = rotation_error(&est.affine, &case.truth);
        out.mean_drift_err_px += d / cfg.trials as f64;
        out.mean_rot_err_deg += r / cfg.trials as f64;
        out.max_drift_err_px = out.max_drift_err_px.max(d);
        out.max_rot_err_deg = out.max_rot_err_deg.max(r);
    }
    Ok(out)
}
