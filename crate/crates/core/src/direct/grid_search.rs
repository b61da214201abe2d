use crate::error::{Error, Result};
use crate::image::{ensure_same_dims, ImageGrid};

/// Matching cost for the exhaustive translation search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridCost {
    /// Mean squared difference over the overlap.
    #[default]
    Ssd,
    /// `1 − NCC` over the overlap; invariant to positive intensity scaling.
    Ncc,
}

/// Result of [`grid_search_translation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMatch {
    pub tx: i64,
    pub ty: i64,
    pub cost: f64,
}

/// Cost of explaining `xt(r, c)` as `x0(r − dy, c − dx)` over the overlap.
pub(crate) fn shift_cost(
    x0: &[f64],
    xt: &[f64],
    height: usize,
    width: usize,
    dx: i64,
    dy: i64,
    cost: GridCost,
) -> Option<f64> {
    let r_lo = dy.max(0) as usize;
    let r_hi = (height as i64 + dy.min(0)) as usize;
    let c_lo = dx.max(0) as usize;
    let c_hi = (width as i64 + dx.min(0)) as usize;
    if r_lo >= r_hi || c_lo >= c_hi {
        return None;
    }
    let n = ((r_hi - r_lo) * (c_hi - c_lo)) as f64;
    match cost {
        GridCost::Ssd => {
            let mut acc = 0.0;
            for r in r_lo..r_hi {
                let src = (r as i64 - dy) as usize * width;
                for c in c_lo..c_hi {
                    let d = xt[r * width + c] - x0[src + (c as i64 - dx) as usize];
                    acc += d * d;
                }
            }
            Some(acc / n)
        }
        GridCost::Ncc => {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for r in r_lo..r_hi {
                let src = (r as i64 - dy) as usize * width;
                for c in c_lo..c_hi {
                    let a = x0[src + (c as i64 - dx) as usize];
                    let b = xt[r * width + c];
                    sa += a;
                    sb += b;
                    saa += a * a;
                    sbb += b * b;
                    sab += a * b;
                }
            }
            let va = saa - sa * sa / n;
            let vb = sbb - sb * sb / n;
            if va <= 1e-12 || vb <= 1e-12 {
                return Some(1.0);
            }
            Some(1.0 - (sab - sa * sb / n) / (va * vb).sqrt())
        }
    }
}

/// Exhaustive integer-shift search in `[−radius, radius]²`. Ties go to the
/// smallest shift norm, then lexicographically smallest `(tx, ty)`.
pub fn grid_search_translation(
    x0: &ImageGrid,
    xt: &ImageGrid,
    radius_px: usize,
    cost: GridCost,
) -> Result<GridMatch> {
    ensure_same_dims(x0.dims(), xt.dims())?;
    let (h, w) = x0.dims();
    if radius_px > h.min(w) / 4 {
        return Err(Error::OutOfRange {
            what: "search radius",
            value: radius_px as f64,
            lo: 0.0,
            hi: (h.min(w) / 4) as f64,
        });
    }
    Ok(search(x0.as_slice(), xt.as_slice(), h, w, radius_px as i64, cost))
}

pub(crate) fn search(x0: &[f64], xt: &[f64], height: usize, width: usize, radius: i64, cost: GridCost) -> GridMatch {
    let mut best = GridMatch {
        tx: 0,
        ty: 0,
        cost: f64::INFINITY,
    };
    for tx in -radius..=radius {
        for ty in -radius..=radius {
            let Some(c) = shift_cost(x0, xt, height, width, tx, ty, cost) else {
                continue;
            };
            let norm = tx * tx + ty * ty;
            let best_norm = best.tx * best.tx + best.ty * best.ty;
            let better = c < best.cost
                || (c == best.cost && (norm, tx, ty) < (best_norm, best.tx, best.ty));
            if better {
                best = GridMatch { tx, ty, cost: c };
            }
        }
    }
    best
}
