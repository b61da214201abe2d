use crate::error::Result;
use crate::image::{AffineParams, DecayMap, ImageGrid};

/// Recovered degradation factors between a reference and a target frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub affine: AffineParams,
    pub decay: DecayMap,
    /// Final registration (or reconstruction) cost; `>= 0`.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Fraction of pixels where the decay was directly observed.
    pub valid_fraction: f64,
}

/// Anything that can explain `target` as a degraded `reference`.
///
/// `t` and `total_steps` locate the target in time; estimators that are not
/// time-conditioned ignore them and always describe the full pair.
pub trait Estimator {
    fn estimate(&self, reference: &ImageGrid, target: &ImageGrid, t: f64, total_steps: u32) -> Result<Estimate>;

    /// Whether `estimate` gives meaningful answers for `t < total_steps`.
    fn time_conditioned(&self) -> bool {
        false
    }
}
