//! Intermediate states between a reference frame and a degraded frame,
//! drift-aligned overlays and displacement fields.

use crate::error::{Error, Result};
use crate::estimate::Estimator;
use crate::image::{build_affine_matrix, degrade_forward, ensure_same_dims, warp, AffineParams, DecayMap, ImageGrid};
use crate::synth::{interpolate_affine, interpolate_decay};

/// How intermediate factors are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InferenceMode {
    /// Estimate the end state once and interpolate it in time.
    #[default]
    Interpolate,
    /// Query a time-conditioned estimator at every step.
    PerStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceFrame {
    pub t: f64,
    pub decay: DecayMap,
    pub affine: AffineParams,
    pub frame: ImageGrid,
}

/// Frames at strictly increasing `t`; the last one is the end state `t = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub frames: Vec<InferenceFrame>,
}

/// Renders `n_steps` evenly spaced states inside `(0, T)` followed by the
/// end state itself.
pub fn infer_sequence(
    x0: &ImageGrid,
    xt: &ImageGrid,
    estimator: &dyn Estimator,
    n_steps: usize,
    total_steps: u32,
    mode: InferenceMode,
) -> Result<InferenceResult> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be at least 1".into()));
    }
    if total_steps == 0 {
        return Err(Error::InvalidParameter("total_steps must be at least 1".into()));
    }
    if mode == InferenceMode::PerStep && !estimator.time_conditioned() {
        return Err(Error::InvalidParameter(
            "per-step inference needs a time-conditioned estimator".into(),
        ));
    }
    ensure_same_dims(x0.dims(), xt.dims())?;
    let total = total_steps as f64;
    let end = estimator.estimate(x0, xt, total, total_steps)?;
    let mut frames = Vec::with_capacity(n_steps + 1);
    for k in 1..=n_steps {
        let t = k as f64 * total / (n_steps + 1) as f64;
        let (decay, affine) = match mode {
            InferenceMode::Interpolate => (
                interpolate_decay(&end.decay, t, total_steps)?,
                interpolate_affine(&end.affine, t, total_steps)?,
            ),
            InferenceMode::PerStep => {
                let e = estimator.estimate(x0, xt, t, total_steps)?;
                (e.decay, e.affine)
            }
        };
        let frame = degrade_forward(x0, &decay, &affine, 0.0)?;
        frames.push(InferenceFrame {
            t,
            decay,
            affine,
            frame,
        });
    }
    let frame = degrade_forward(x0, &end.decay, &end.affine, 0.0)?;
    frames.push(InferenceFrame {
        t: total,
        decay: end.decay,
        affine: end.affine,
        frame,
    });
    Ok(InferenceResult { frames })
}

/// `0.5·x0 + 0.5·xT` after pulling `xT` back into the reference frame.
pub fn align_overlay(x0: &ImageGrid, xt: &ImageGrid, affine: &AffineParams) -> Result<ImageGrid> {
    ensure_same_dims(x0.dims(), xt.dims())?;
    let inv = build_affine_matrix(affine)?.inverse()?;
    let back = warp(xt, &inv, 0.0)?;
    let data = x0
        .as_slice()
        .iter()
        .zip(back.as_slice())
        .map(|(a, b)| 0.5 * a + 0.5 * b)
        .collect();
    ImageGrid::new(x0.height(), x0.width(), data)
}

/// Displacement `T(p) − p` sampled every `stride` pixels, as two planes.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    /// Number of sampled rows and columns.
    pub height: usize,
    pub width: usize,
    pub stride: usize,
    /// Row-major horizontal components.
    pub dx: Vec<f64>,
    /// Row-major vertical components.
    pub dy: Vec<f64>,
}

impl FlowField {
    /// Components at sample `(i, j)`, i.e. pixel `(i·stride, j·stride)`.
    pub fn at(&self, i: usize, j: usize) -> (f64, f64) {
        let k = i * self.width + j;
        (self.dx[k], self.dy[k])
    }
}

pub fn flow_map(affine: &AffineParams, height: usize, width: usize, stride: usize) -> Result<FlowField> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be at least 1".into()));
    }
    let m = build_affine_matrix(affine)?;
    let (cx, cy) = ((width as f64 - 1.0) * 0.5, (height as f64 - 1.0) * 0.5);
    let rows = height.div_ceil(stride);
    let cols = width.div_ceil(stride);
    let mut dx = Vec::with_capacity(rows * cols);
    let mut dy = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let v = (i * stride) as f64 - cy;
        for j in 0..cols {
            let u = (j * stride) as f64 - cx;
            let (x, y) = m.apply(u, v);
            dx.push(x - u);
            dy.push(y - v);
        }
    }
    Ok(FlowField {
        height: rows,
        width: cols,
        stride,
        dx,
        dy,
    })
}
