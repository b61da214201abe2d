use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::optim::{learning_rate, AdamW};
use super::reconstruct::mse;
use super::{ModelConfig, ModelParams, Network, SampleSource, TrainItem};

/// Validation samples are drawn from this index upward so they never
/// coincide with training samples.
const VALIDATION_BASE: u64 = 1 << 62;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub cosine: bool,
    pub seed: u64,
    /// Number of held-out samples scored at each validation.
    pub validation_size: usize,
    /// Validation runs every this many steps and after the last step.
    pub validation_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            steps: 2000,
            learning_rate: 1e-4,
            weight_decay: 1e-4,
            cosine: true,
            seed: 0,
            validation_size: 64,
            validation_every: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning_rate must be finite and non-negative".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidParameter("weight_decay must be finite and non-negative".into()));
        }
        if self.validation_every == 0 {
            return Err(Error::InvalidParameter("validation_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// One row of the loss history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: usize,
    pub lr: f64,
    /// Mean reconstruction loss of the training batch before the update.
    pub loss: f64,
    /// Mean reconstruction loss on the validation set after the update.
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<TrainRecord>,
    /// Loss of predicting `x̂_t = x0` on the validation set.
    pub identity_baseline: f64,
}

impl TrainOutcome {
    /// Mean validation loss over the records of the last `window` steps.
    pub fn final_validation_mean(&self, window: usize) -> Option<f64> {
        let last = self.history.last()?.step;
        let vals: Vec<f64> = self
            .history
            .iter()
            .filter(|r| r.step + window > last)
            .filter_map(|r| r.val_loss)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Mean reconstruction loss of `params` over `items`.
pub fn validation_loss(params: &ModelParams, items: &[TrainItem]) -> Result<f64> {
    let net = params.network()?;
    let losses = items
        .par_iter()
        .map(|item| net.loss_and_grad::<f32>(&params.values, item, None))
        .collect::<Result<Vec<f32>>>()?;
    Ok(losses.iter().map(|&l| l as f64).sum::<f64>() / items.len().max(1) as f64)
}

/// Loss of the predictor that ignores degradation entirely.
pub fn identity_baseline(items: &[TrainItem]) -> f64 {
    let total: f64 = items
        .iter()
        .map(|it| mse(it.x0_render.as_slice(), it.target.as_slice()))
        .sum();
    total / items.len().max(1) as f64
}

fn items(source: &dyn SampleSource, start: u64, count: usize) -> Result<Vec<TrainItem>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| source.sample(start + i).map(|s| TrainItem::from_sample(&s)))
        .collect()
}

/// The training batch used at `step`.
pub fn training_batch(source: &dyn SampleSource, cfg: &TrainConfig, step: usize) -> Result<Vec<TrainItem>> {
    items(source, (step * cfg.batch_size) as u64, cfg.batch_size)
}

/// Trains from scratch. The result depends only on the configs and the
/// source, not on the thread count: per-sample gradients are summed in
/// batch order. Every step draws a fresh batch.
pub fn train(cfg: &TrainConfig, model_cfg: &ModelConfig, source: &dyn SampleSource) -> Result<TrainOutcome> {
    cfg.validate()?;
    if source.input_size() != model_cfg.input_size {
        return Err(Error::Dimension {
            expected: format!("{:?} samples", model_cfg.input_size),
            actual: format!("{:?}", source.input_size()),
        });
    }
    let mut params = ModelParams::init(model_cfg, cfg.seed)?;
    let net: Network = params.network()?;
    let validation = items(source, VALIDATION_BASE, cfg.validation_size)?;
    let identity = identity_baseline(&validation);
    let mut opt = AdamW::new(params.values.len(), cfg.weight_decay as f32);
    let mut grad = vec![0.0f32; params.values.len()];
    let mut history = Vec::with_capacity(cfg.steps);
    let scale = 1.0 / cfg.batch_size as f32;
    for step in 0..cfg.steps {
        let batch = training_batch(source, cfg, step)?;
        let parts = batch
            .par_iter()
            .map(|item| {
                let mut g = vec![0.0f32; grad.len()];
                let l = net.loss_and_grad(&params.values, item, Some((&mut g, scale)))?;
                Ok((l as f64, g))
            })
            .collect::<Result<Vec<_>>>()?;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0f64;
        for (l, g) in &parts {
            loss += l;
            for (a, &b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        loss /= batch.len() as f64;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::TrainingDiverged { step, loss });
        }
        let lr = learning_rate(cfg.learning_rate, step, cfg.steps, cfg.cosine);
        opt.update(&mut params.values, &grad, lr as f32);
        let val_loss = if !validation.is_empty() && ((step + 1) % cfg.validation_every == 0 || step + 1 == cfg.steps) {
            let v = validation_loss(&params, &validation)?;
            if !v.is_finite() {
                return Err(Error::TrainingDiverged { step, loss: v });
            }
            Some(v)
        } else {
            None
        };
        history.push(TrainRecord {
            step,
            lr,
            loss,
            val_loss,
        });
    }
    Ok(TrainOutcome {
        params,
        history,
        identity_baseline: identity,
    })
}
