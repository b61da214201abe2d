use crate::error::Result;
use crate::image::warp::{center, sample_with_grad, source_point, warp_slice};
use crate::image::{build_affine_matrix, degrade_forward, ensure_same_dims, AffineParams, DecayMap, ImageGrid};
use crate::real::Real;

const DEG: f64 = std::f64::consts::PI / 180.0;

/// Renders `warp(λ ⊙ x0, 𝒯)`; identical to [`degrade_forward`] with zero fill.
pub fn reconstruct(x0: &ImageGrid, lam: &DecayMap, affine: &AffineParams) -> Result<ImageGrid> {
    degrade_forward(x0, lam, affine, 0.0)
}

/// Mean squared error over pixels.
pub fn loss_rec(pred: &ImageGrid, target: &ImageGrid) -> Result<f64> {
    ensure_same_dims(pred.dims(), target.dims())?;
    Ok(mse(pred.as_slice(), target.as_slice()))
}

pub(crate) fn mse<F: Real>(a: &[F], b: &[F]) -> F {
    let n = F::of(a.len() as f64);
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<F>() / n
}

/// Generic forward used in training; returns the attenuated image too.
pub(crate) fn reconstruct_slice<F: Real>(
    x0: &[F],
    lam: &[F],
    height: usize,
    width: usize,
    affine: &AffineParams,
) -> Result<(Vec<F>, Vec<F>)> {
    let att: Vec<F> = x0.iter().zip(lam).map(|(&x, &l)| x * l).collect();
    let inv = build_affine_matrix(affine)?.inverse()?;
    let out = warp_slice(&att, height, width, &inv, F::zero());
    Ok((out, att))
}

/// Backpropagates `dout` through the reconstruction. Returns the gradient
/// with respect to the decay map and to `(θ°, tx, ty)`.
pub(crate) fn reconstruct_backward<F: Real>(
    x0: &[F],
    att: &[F],
    height: usize,
    width: usize,
    affine: &AffineParams,
    dout: &[F],
) -> Result<(Vec<F>, [F; 3])> {
    let inv = build_affine_matrix(affine)?.inverse()?;
    let (cx, cy) = center(height, width);
    let (s, c) = (affine.theta_deg * DEG).sin_cos();
    let mut datt = vec![F::zero(); att.len()];
    let mut dp = [F::zero(); 3];
    for r in 0..height {
        for col in 0..width {
            let g = dout[r * width + col];
            if g == F::zero() {
                continue;
            }
            let (x, y) = source_point(&inv, cx, cy, r, col);
            let taps = crate::image::warp::Taps::at(x, y);
            if taps.outside(height, width) {
                continue;
            }
            let w = taps.weights::<F>();
            for (k, (dy, dx)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                if let Some(i) = taps.index(dy, dx, height, width) {
                    datt[i] = datt[i] + g * w[k];
                }
            }
            let (_, gx, gy) = sample_with_grad(att, height, width, x, y, F::zero());
            let (su, sv) = (x - cx, y - cy);
            // Source point is R(−θ)(q − t): derivatives in θ (radians), tx, ty.
            let dth = F::of(DEG) * (gx * F::of(sv) - gy * F::of(su));
            let dtx = -gx * F::of(c) + gy * F::of(s);
            let dty = -gx * F::of(s) - gy * F::of(c);
            dp[0] = dp[0] + g * dth;
            dp[1] = dp[1] + g * dtx;
            dp[2] = dp[2] + g * dty;
        }
    }
    let dlam = datt.iter().zip(x0).map(|(&d, &x)| d * x).collect();
    Ok((dlam, dp))
}

/// Loss of the reconstruction against `target` with its gradient with
/// respect to every decay-map pixel and to `(θ°, tx, ty)`.
pub fn reconstruct_loss_grad(
    x0: &ImageGrid,
    lam: &DecayMap,
    affine: &AffineParams,
    target: &ImageGrid,
) -> Result<(f64, Vec<f64>, [f64; 3])> {
    ensure_same_dims(x0.dims(), lam.dims())?;
    ensure_same_dims(x0.dims(), target.dims())?;
    let (h, w) = x0.dims();
    let (out, att) = reconstruct_slice(x0.as_slice(), lam.as_slice(), h, w, affine)?;
    let n = out.len() as f64;
    let loss = mse(&out, target.as_slice());
    let dout: Vec<f64> = out.iter().zip(target.as_slice()).map(|(a, b)| 2.0 * (a - b) / n).collect();
    let (dlam, dp) = reconstruct_backward(x0.as_slice(), &att, h, w, affine, &dout)?;
    Ok((loss, dlam, dp))
}
