//! Grayscale frames, rigid drift matrices and the forward degradation
//! `x_t = warp(λ_t ⊙ x_0, T_t)`.

mod affine;
mod grid;
pub(crate) mod warp;

pub use affine::{build_affine_matrix, invert_affine, AffineMatrix, AffineParams};
pub use grid::{DecayMap, ImageGrid};
pub(crate) use grid::ensure_same_dims;
pub use warp::{warp, warp_with_mask};

use crate::error::Result;

/// Elementwise product `λ ⊙ img`.
pub fn attenuate(img: &ImageGrid, lam: &DecayMap) -> Result<ImageGrid> {
    ensure_same_dims(lam.dims(), img.dims())?;
    let data = img
        .as_slice()
        .iter()
        .zip(lam.as_slice())
        .map(|(x, l)| x * l)
        .collect();
    Ok(ImageGrid::from_raw(img.height(), img.width(), data))
}

/// Decay strictly before drift: `warp(attenuate(x0, lam), T(params), fill)`.
pub fn degrade_forward(
    x0: &ImageGrid,
    lam: &DecayMap,
    params: &AffineParams,
    fill: f64,
) -> Result<ImageGrid> {
    let m = build_affine_matrix(params)?;
    let decayed = attenuate(x0, lam)?;
    warp(&decayed, &m, fill)
}
