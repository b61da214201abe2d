//! Time-conditioned dual-stream network that predicts the decay map and
//! drift at an arbitrary step, trained only through the reconstruction loss.

mod layers;
mod network;
mod optim;
mod reconstruct;
mod source;
mod train;

pub use network::{Network, TensorEntry};
pub use reconstruct::{loss_rec, reconstruct, reconstruct_loss_grad};
pub use source::{MapSource, SampleSource, SyntheticSource};
pub use train::{identity_baseline, train, training_batch, validation_loss, TrainConfig, TrainOutcome, TrainRecord};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{Estimate, Estimator};
use crate::image::{ensure_same_dims, AffineParams, DecayMap, ImageGrid};
use crate::real::Real;
use crate::rng::rng_from_seed;

use network::Init;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub base_channels: usize,
    /// Number of stride-2 stages.
    pub depth: usize,
    pub time_embed_dim: usize,
    pub theta_max_deg: f64,
    pub shift_max_px: f64,
    /// `[height, width]`.
    pub input_size: [usize; 2],
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            base_channels: 8,
            depth: 2,
            time_embed_dim: 32,
            theta_max_deg: 30.0,
            shift_max_px: 64.0,
            input_size: [64, 64],
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let [h, w] = self.input_size;
        let unit = 1usize.checked_shl(self.depth as u32).unwrap_or(0);
        if self.depth == 0 || self.depth > 6 || unit == 0 || h == 0 || w == 0 || h % unit != 0 || w % unit != 0 {
            return Err(Error::InvalidParameter(format!(
                "input {h}x{w} must be non-empty and divisible by 2^depth (depth {} in 1..=6)",
                self.depth
            )));
        }
        if self.base_channels == 0 || self.base_channels > 256 {
            return Err(Error::InvalidParameter("base_channels must be in 1..=256".into()));
        }
        if self.time_embed_dim < 2 || self.time_embed_dim % 2 != 0 || self.time_embed_dim > 4096 {
            return Err(Error::InvalidParameter("time_embed_dim must be even and in 2..=4096".into()));
        }
        if !(self.theta_max_deg > 0.0 && self.theta_max_deg < 90.0) {
            return Err(Error::InvalidParameter("theta_max_deg must be in (0, 90)".into()));
        }
        if !(self.shift_max_px > 0.0 && self.shift_max_px.is_finite()) {
            return Err(Error::InvalidParameter("shift_max_px must be positive".into()));
        }
        Ok(())
    }
}

/// Learnable state of the network: a flat `f32` vector laid out by the
/// manifest of [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub seed: u64,
    pub values: Vec<f32>,
}

impl ModelParams {
    /// Fan-in uniform initialization; the decay output and affine output
    /// layers start at zero.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        let net = Network::new(config)?;
        let mut rng = rng_from_seed(seed);
        let mut values = vec![0.0f32; net.param_count()];
        for (entry, init) in net.inits() {
            if let Init::FanIn(fan_in) = init {
                let bound = (3.0 / fan_in as f64).sqrt();
                for v in &mut values[entry.offset..entry.offset + entry.len()] {
                    *v = (bound * (2.0 * rng.random::<f64>() - 1.0)) as f32;
                }
            }
        }
        Ok(Self {
            config: config.clone(),
            seed,
            values,
        })
    }

    pub fn network(&self) -> Result<Network> {
        let net = Network::new(&self.config)?;
        if net.param_count() != self.values.len() {
            return Err(Error::Dimension {
                expected: format!("{} parameters", net.param_count()),
                actual: format!("{}", self.values.len()),
            });
        }
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        self.network()?;
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("model parameters contain non-finite values".into()));
        }
        Ok(())
    }
}

/// Inputs and target of one reconstruction-loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainItem {
    /// Reference frame seen by the network.
    pub x0_input: ImageGrid,
    /// Final frame seen by the network.
    pub xt_input: ImageGrid,
    /// Reference frame that gets degraded in the reconstruction.
    pub x0_render: ImageGrid,
    /// Frame the reconstruction is compared against.
    pub target: ImageGrid,
    pub t: f64,
    pub total_steps: f64,
}

impl TrainItem {
    /// Uses the clean reference for rendering and the clean intermediate frame
    /// as target; the network sees the noisy end frames.
    pub fn from_sample(s: &crate::synth::SequenceSample) -> Self {
        Self {
            x0_input: s.x0_noisy.clone(),
            xt_input: s.xt_noisy_final.clone(),
            x0_render: s.x0_clean.clone(),
            target: s.xt_clean.clone(),
            t: s.t as f64,
            total_steps: s.total_steps as f64,
        }
    }
}

fn to_real<F: Real>(img: &ImageGrid) -> Vec<F> {
    img.as_slice().iter().map(|&v| F::of(v)).collect()
}

impl Network {
    /// Reconstruction loss of one item and, if `grad` is given, accumulates
    /// `scale · ∂loss/∂params` into it.
    pub fn loss_and_grad<F: Real>(&self, params: &[F], item: &TrainItem, grad: Option<(&mut [F], F)>) -> Result<F> {
        let [h, w] = self.config().input_size;
        for img in [&item.x0_input, &item.xt_input, &item.x0_render, &item.target] {
            ensure_same_dims((h, w), img.dims())?;
        }
        let x0: Vec<F> = to_real(&item.x0_input);
        let xt: Vec<F> = to_real(&item.xt_input);
        let trace = self.forward(params, &x0, &xt, item.t, item.total_steps)?;
        let affine = AffineParams::new(
            trace.affine[0].as_f64(),
            trace.affine[1].as_f64(),
            trace.affine[2].as_f64(),
        );
        let render: Vec<F> = to_real(&item.x0_render);
        let target: Vec<F> = to_real(&item.target);
        let (out, att) = reconstruct::reconstruct_slice(&render, &trace.lambda, h, w, &affine)?;
        let loss = reconstruct::mse(&out, &target);
        if let Some((grad, scale)) = grad {
            let k = scale * F::of(2.0 / out.len() as f64);
            let dout: Vec<F> = out.iter().zip(&target).map(|(&a, &b)| k * (a - b)).collect();
            let (dlam, daff) = reconstruct::reconstruct_backward(&render, &att, h, w, &affine, &dout)?;
            self.backward(params, &trace, &dlam, daff, grad);
        }
        Ok(loss)
    }

    /// Decay map and drift predicted for step `t` of `total_steps`.
    pub fn predict_raw(&self, params: &[f32], x0: &ImageGrid, xt: &ImageGrid, t: f64, total_steps: f64) -> Result<(DecayMap, AffineParams)> {
        let [h, w] = self.config().input_size;
        ensure_same_dims((h, w), x0.dims())?;
        ensure_same_dims((h, w), xt.dims())?;
        let a: Vec<f32> = to_real(x0);
        let b: Vec<f32> = to_real(xt);
        let tr = self.forward(params, &a, &b, t, total_steps)?;
        // Squash in f64 and stay off the endpoints when saturated, so the
        // open-interval output ranges hold for any logits.
        let open = |v: f64| v.clamp(f64::EPSILON, 1.0 - f64::EPSILON);
        let lam = tr.logits.iter().map(|&z| open(1.0 / (1.0 + (-(z as f64)).exp()))).collect();
        let bounded = |raw: f32, max: f64| max * (raw as f64).tanh().clamp(-1.0 + f64::EPSILON, 1.0 - f64::EPSILON);
        let cfg = self.config();
        Ok((
            DecayMap::new(h, w, lam)?,
            AffineParams::new(
                bounded(tr.head_raw[0], cfg.theta_max_deg),
                bounded(tr.head_raw[1], cfg.shift_max_px),
                bounded(tr.head_raw[2], cfg.shift_max_px),
            ),
        ))
    }
}

/// Network forward for step `t`: `(λ̂_t, 𝒯̂_t)`.
pub fn forward(params: &ModelParams, x0: &ImageGrid, xt: &ImageGrid, t: f64, total_steps: f64) -> Result<(DecayMap, AffineParams)> {
    params.network()?.predict_raw(&params.values, x0, xt, t, total_steps)
}

/// Forward pass wrapped as an [`Estimate`]. The residual is the
/// reconstruction loss against `xt` at `t = T` and zero otherwise, since no
/// observed frame exists for intermediate steps.
pub fn predict(params: &ModelParams, x0: &ImageGrid, xt: &ImageGrid, t: f64, total_steps: f64) -> Result<Estimate> {
    estimate_with(&params.network()?, &params.values, x0, xt, t, total_steps)
}

fn estimate_with(net: &Network, values: &[f32], x0: &ImageGrid, xt: &ImageGrid, t: f64, total_steps: f64) -> Result<Estimate> {
    let (decay, affine) = net.predict_raw(values, x0, xt, t, total_steps)?;
    let residual = if t == total_steps {
        loss_rec(&reconstruct(x0, &decay, &affine)?, xt)?
    } else {
        0.0
    };
    Ok(Estimate {
        affine,
        decay,
        residual,
        converged: true,
        iterations: 1,
        valid_fraction: 1.0,
    })
}

/// [`Estimator`] backed by trained parameters.
#[derive(Debug, Clone)]
pub struct LearnedEstimator {
    pub params: ModelParams,
    network: Network,
}

impl LearnedEstimator {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let network = params.network()?;
        Ok(Self { params, network })
    }
}

impl Estimator for LearnedEstimator {
    fn estimate(&self, reference: &ImageGrid, target: &ImageGrid, t: f64, total_steps: u32) -> Result<Estimate> {
        estimate_with(&self.network, &self.params.values, reference, target, t, total_steps as f64)
    }

    fn time_conditioned(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests;
