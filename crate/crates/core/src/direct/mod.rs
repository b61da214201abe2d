//! Optimization-based estimation of drift and survival from a frame pair.

mod decay;
mod grid_search;
mod phase;
mod register;

pub use decay::decay_from_pair;
pub use grid_search::{grid_search_translation, GridCost, GridMatch};
pub use register::{ncc_cost_terms, register_affine, CostTerms, Registration};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{Estimate, Estimator};
use crate::image::{attenuate, ImageGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DirectConfig {
    pub pyramid_levels: usize,
    pub max_gn_iters: usize,
    pub param_tol_px: f64,
    pub param_tol_deg: f64,
    pub rotation_starts_deg: Vec<f64>,
    /// Reference intensities at or below this are not divided by.
    pub eps_denom: f64,
    pub lambda_smooth_sigma: f64,
    pub smooth_decay: bool,
    /// Total registration passes; later passes use the decay-compensated reference.
    pub max_alternations: usize,
}

impl Default for DirectConfig {
    fn default() -> Self {
        Self {
            pyramid_levels: 3,
            max_gn_iters: 30,
            param_tol_px: 0.01,
            param_tol_deg: 0.01,
            rotation_starts_deg: vec![-15.0, -7.5, 0.0, 7.5, 15.0],
            eps_denom: 0.05,
            lambda_smooth_sigma: 2.0,
            smooth_decay: true,
            max_alternations: 3,
        }
    }
}

impl DirectConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.pyramid_levels == 0 || self.max_gn_iters == 0 || self.max_alternations == 0 {
            return Err(Error::InvalidParameter(
                "pyramid_levels, max_gn_iters and max_alternations must be at least 1".into(),
            ));
        }
        if !positive(self.param_tol_px) || !positive(self.param_tol_deg) || !positive(self.eps_denom) {
            return Err(Error::InvalidParameter("tolerances and eps_denom must be positive".into()));
        }
        if !(self.lambda_smooth_sigma.is_finite() && self.lambda_smooth_sigma >= 0.0) {
            return Err(Error::InvalidParameter("lambda_smooth_sigma must be non-negative".into()));
        }
        if self.rotation_starts_deg.is_empty() || self.rotation_starts_deg.iter().any(|t| !(t.abs() < 90.0)) {
            return Err(Error::InvalidParameter(
                "rotation_starts_deg must be non-empty with |θ| < 90".into(),
            ));
        }
        Ok(())
    }
}

/// Full direct estimate: register, recover decay, then re-register against
/// the decay-compensated reference until the drift stops moving.
/// `converged` reports the final Gauss-Newton refinement; running out of
/// alternations is not a failure.
pub fn estimate_direct(x0: &ImageGrid, xt: &ImageGrid, cfg: &DirectConfig) -> Result<Estimate> {
    let mut reg = register_affine(x0, xt, cfg)?;
    let (mut decay, mut valid_fraction) = decay_from_pair(x0, xt, &reg.params, cfg)?;
    let mut iterations = reg.iterations;
    for _ in 1..cfg.max_alternations {
        let reference = attenuate(x0, &decay)?;
        let next = register::refine_affine(&reference, xt, &reg.params, cfg)?;
        iterations += next.iterations;
        let moved_deg = (next.params.theta_deg - reg.params.theta_deg).abs();
        let moved_px = (next.params.tx_px - reg.params.tx_px)
            .abs()
            .max((next.params.ty_px - reg.params.ty_px).abs());
        reg = next;
        (decay, valid_fraction) = decay_from_pair(x0, xt, &reg.params, cfg)?;
        if moved_deg < cfg.param_tol_deg && moved_px < cfg.param_tol_px {
            break;
        }
    }
    Ok(Estimate {
        affine: reg.params,
        decay,
        residual: reg.cost.max(0.0),
        converged: reg.converged,
        iterations,
        valid_fraction,
    })
}

/// [`Estimator`] wrapper around [`estimate_direct`].
#[derive(Debug, Clone, Default)]
pub struct DirectEstimator {
    pub config: DirectConfig,
}

impl Estimator for DirectEstimator {
    fn estimate(&self, reference: &ImageGrid, target: &ImageGrid, _t: f64, _total_steps: u32) -> Result<Estimate> {
        estimate_direct(reference, target, &self.config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{degrade_forward, AffineParams, DecayMap};
    use crate::synth::{gen_atom_map, AtomMapSpec};

    #[test]
    fn joint_estimate_on_uniform_decay() {
        let x0 = gen_atom_map(&AtomMapSpec::default(), 128, 128).unwrap();
        let truth = AffineParams::new(-3.0, 4.0, 2.5);
        let lam = DecayMap::uniform(128, 128, 0.6).unwrap();
        let xt = degrade_forward(&x0, &lam, &truth, 0.0).unwrap();
        let est = estimate_direct(&x0, &xt, &DirectConfig::default()).unwrap();
        assert!((est.affine.theta_deg - truth.theta_deg).abs() < 0.1);
        assert!((est.affine.tx_px - truth.tx_px).abs() < 0.1);
        assert!((est.affine.ty_px - truth.ty_px).abs() < 0.1);
        assert!((est.decay.mean() - 0.6).abs() < 0.05, "{}", est.decay.mean());
        assert!(est.residual >= 0.0);
        assert!(est.valid_fraction > 0.0 && est.valid_fraction <= 1.0);
    }

    #[test]
    fn self_pair_is_identity_with_full_survival() {
        let x0 = gen_atom_map(&AtomMapSpec::default(), 96, 96).unwrap();
        let est = estimate_direct(&x0, &x0, &DirectConfig::default()).unwrap();
        assert!(est.affine.theta_deg.abs() < 1e-6 && est.affine.translation_norm() < 1e-6);
        assert!(est.residual < 1e-9);
        assert!(est.decay.as_slice().iter().all(|&v| v >= 1.0 - 1e-6));
        assert!(est.converged);
    }

    #[test]
    fn deterministic_and_scale_invariant() {
        let x0 = gen_atom_map(&AtomMapSpec::default(), 96, 96).unwrap();
        let truth = AffineParams::new(2.0, -3.0, 1.5);
        let lam = DecayMap::uniform(96, 96, 0.8).unwrap();
        let xt = degrade_forward(&x0, &lam, &truth, 0.0).unwrap();
        let cfg = DirectConfig::default();
        let a = estimate_direct(&x0, &xt, &cfg).unwrap();
        let b = estimate_direct(&x0, &xt, &cfg).unwrap();
        assert_eq!(a, b);
        for c in [0.5, 2.0] {
            let e = estimate_direct(&x0, &xt.scaled(c).unwrap(), &cfg).unwrap();
            assert!((e.affine.theta_deg - a.affine.theta_deg).abs() < cfg.param_tol_deg);
            assert!((e.affine.tx_px - a.affine.tx_px).abs() < cfg.param_tol_px);
            assert!((e.affine.ty_px - a.affine.ty_px).abs() < cfg.param_tol_px);
        }
    }

    #[test]
    fn simulator_round_trip_with_spatial_decay() {
        use crate::metrics::damage_intensity;
        use crate::synth::{make_final_decay, perlin_field};
        let x0 = gen_atom_map(&AtomMapSpec::default(), 256, 256).unwrap();
        let cases = [(0.0, 3.5, 0.0), (12.0, 9.0, -10.0), (-14.0, -6.0, 12.0), (6.0, 0.0, 14.5)];
        for (i, &(theta, tx, ty)) in cases.iter().enumerate() {
            let field = perlin_field(256, 256, 3, 3, 40 + i as u64).unwrap();
            let lam = make_final_decay(&field, 0.35).unwrap();
            let truth = AffineParams::new(theta, tx, ty);
            let xt = degrade_forward(&x0, &lam, &truth, 0.0).unwrap();
            let est = estimate_direct(&x0, &xt, &DirectConfig::default()).unwrap();
            assert!((est.affine.theta_deg - theta).abs() < 0.5, "{:?}", est.affine);
            assert!((est.affine.tx_px - tx).abs() < 0.5, "{:?}", est.affine);
            assert!((est.affine.ty_px - ty).abs() < 0.5, "{:?}", est.affine);
            let d = damage_intensity(&est.decay).unwrap() - damage_intensity(&lam).unwrap();
            assert!(d.abs() < 0.02, "intensity off by {d}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(DirectConfig::default().validate().is_ok());
        let bad = DirectConfig {
            rotation_starts_deg: vec![],
            ..DirectConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
