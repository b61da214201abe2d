use crate::error::{Error, Result};
use crate::real::Real;

use super::affine::AffineMatrix;
use super::grid::ImageGrid;

/// Center of the centered coordinate frame, `((W-1)/2, (H-1)/2)`.
#[inline]
pub(crate) fn center(height: usize, width: usize) -> (f64, f64) {
    ((width as f64 - 1.0) * 0.5, (height as f64 - 1.0) * 0.5)
}

/// Pixel-space location `(x, y)` that output pixel `(row, col)` pulls from.
#[inline]
pub(crate) fn source_point(inv: &AffineMatrix, cx: f64, cy: f64, row: usize, col: usize) -> (f64, f64) {
    let (su, sv) = inv.apply(col as f64 - cx, row as f64 - cy);
    (su + cx, sv + cy)
}

/// True when every tap with non-zero weight lies inside the image.
#[inline]
pub(crate) fn in_bounds(x: f64, y: f64, height: usize, width: usize) -> bool {
    x >= 0.0 && y >= 0.0 && x <= (width - 1) as f64 && y <= (height - 1) as f64
}

/// Bilinear footprint of a sample point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Taps {
    pub x0: isize,
    pub y0: isize,
    pub fx: f64,
    pub fy: f64,
}

impl Taps {
    #[inline]
    pub fn at(x: f64, y: f64) -> Self {
        let xf = x.floor();
        let yf = y.floor();
        Self {
            x0: xf as isize,
            y0: yf as isize,
            fx: x - xf,
            fy: y - yf,
        }
    }

    /// Footprint entirely outside the image: the sample is just `fill`.
    #[inline]
    pub fn outside(&self, height: usize, width: usize) -> bool {
        self.x0 + 1 < 0 || self.y0 + 1 < 0 || self.x0 >= width as isize || self.y0 >= height as isize
    }

    /// Flat index of tap `(dy, dx)` if inside the image.
    #[inline]
    pub fn index(&self, dy: isize, dx: isize, height: usize, width: usize) -> Option<usize> {
        let r = self.y0 + dy;
        let c = self.x0 + dx;
        if r >= 0 && c >= 0 && (r as usize) < height && (c as usize) < width {
            Some(r as usize * width + c as usize)
        } else {
            None
        }
    }

    #[inline]
    fn corners<F: Real>(&self, data: &[F], height: usize, width: usize, fill: F) -> [F; 4] {
        let get = |dy, dx| self.index(dy, dx, height, width).map_or(fill, |i| data[i]);
        [get(0, 0), get(0, 1), get(1, 0), get(1, 1)]
    }

    /// Weights of the four taps in `[00, 01, 10, 11]` order.
    #[inline]
    pub fn weights<F: Real>(&self) -> [F; 4] {
        let fx = F::of(self.fx);
        let fy = F::of(self.fy);
        let gx = F::one() - fx;
        let gy = F::one() - fy;
        [gx * gy, fx * gy, gx * fy, fx * fy]
    }
}

/// Bilinear sample at pixel-space `(x, y)`; taps outside the image read `fill`.
#[inline]
pub(crate) fn sample<F: Real>(data: &[F], height: usize, width: usize, x: f64, y: f64, fill: F) -> F {
    let taps = Taps::at(x, y);
    if taps.outside(height, width) {
        return fill;
    }
    let v = taps.corners(data, height, width, fill);
    let w = taps.weights::<F>();
    v[0] * w[0] + v[1] * w[1] + v[2] * w[2] + v[3] * w[3]
}

/// Bilinear sample plus its exact partial derivatives in `x` and `y`
/// (within the cell containing the point).
#[inline]
pub(crate) fn sample_with_grad<F: Real>(
    data: &[F],
    height: usize,
    width: usize,
    x: f64,
    y: f64,
    fill: F,
) -> (F, F, F) {
    let taps = Taps::at(x, y);
    if taps.outside(height, width) {
        return (fill, F::zero(), F::zero());
    }
    let [v00, v01, v10, v11] = taps.corners(data, height, width, fill);
    let w = taps.weights::<F>();
    let fx = F::of(taps.fx);
    let fy = F::of(taps.fy);
    let value = v00 * w[0] + v01 * w[1] + v10 * w[2] + v11 * w[3];
    let dx = (F::one() - fy) * (v01 - v00) + fy * (v11 - v10);
    let dy = (F::one() - fx) * (v10 - v00) + fx * (v11 - v01);
    (value, dx, dy)
}

/// Resamples `data` (row-major `height x width`) through the inverse of `m`.
pub(crate) fn warp_slice<F: Real>(data: &[F], height: usize, width: usize, inv: &AffineMatrix, fill: F) -> Vec<F> {
    let (cx, cy) = center(height, width);
    let mut out = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let (x, y) = source_point(inv, cx, cy, r, c);
            out.push(sample(data, height, width, x, y, fill));
        }
    }
    out
}

fn check_fill(fill: f64) -> Result<()> {
    if !fill.is_finite() || fill < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "fill intensity {fill} must be finite and non-negative"
        )));
    }
    Ok(())
}

/// Applies the drift `m` to `img` by inverse mapping: output pixel `p`
/// takes the bilinear sample of `img` at `m⁻¹(p)` in centered coordinates.
pub fn warp(img: &ImageGrid, m: &AffineMatrix, fill: f64) -> Result<ImageGrid> {
    check_fill(fill)?;
    let inv = m.inverse()?;
    let out = warp_slice(img.as_slice(), img.height(), img.width(), &inv, fill);
    Ok(ImageGrid::from_raw(img.height(), img.width(), out))
}

/// Like [`warp`], also returning which output pixels sampled entirely
/// inside the source image.
pub fn warp_with_mask(img: &ImageGrid, m: &AffineMatrix, fill: f64) -> Result<(ImageGrid, Vec<bool>)> {
    check_fill(fill)?;
    let inv = m.inverse()?;
    let (h, w) = img.dims();
    let (cx, cy) = center(h, w);
    let mut out = Vec::with_capacity(h * w);
    let mut mask = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let (x, y) = source_point(&inv, cx, cy, r, c);
            out.push(sample(img.as_slice(), h, w, x, y, fill));
            mask.push(in_bounds(x, y, h, w));
        }
    }
    Ok((ImageGrid::from_raw(h, w, out), mask))
}
