use rand::Rng as _;

use crate::error::{Error, Result};
use crate::image::DecayMap;
use crate::rng::rng_from_seed;

const PERSISTENCE: f64 = 0.5;
const LACUNARITY: usize = 2;
const MAX_CELLS: usize = 4096;

/// Gradient lattice of one octave: `(n + 1)^2` random unit vectors.
struct GradientLattice {
    n: usize,
    grads: Vec<(f64, f64)>,
}

impl GradientLattice {
    fn random(n: usize, rng: &mut crate::rng::Rng) -> Self {
        let grads = (0..(n + 1) * (n + 1))
            .map(|_| {
                let a = rng.random::<f64>() * std::f64::consts::TAU;
                (a.cos(), a.sin())
            })
            .collect();
        Self { n, grads }
    }

    fn dot(&self, ix: usize, iy: usize, dx: f64, dy: f64) -> f64 {
        let (gx, gy) = self.grads[iy * (self.n + 1) + ix];
        gx * dx + gy * dy
    }

    /// Classic gradient noise at lattice coordinates `(x, y)` in `[0, n]`.
    fn noise(&self, x: f64, y: f64) -> f64 {
        let ix = (x.floor() as usize).min(self.n - 1);
        let iy = (y.floor() as usize).min(self.n - 1);
        let fx = x - ix as f64;
        let fy = y - iy as f64;
        let n00 = self.dot(ix, iy, fx, fy);
        let n10 = self.dot(ix + 1, iy, fx - 1.0, fy);
        let n01 = self.dot(ix, iy + 1, fx, fy - 1.0);
        let n11 = self.dot(ix + 1, iy + 1, fx - 1.0, fy - 1.0);
        let u = fade(fx);
        let v = fade(fy);
        let a = n00 + u * (n10 - n00);
        let b = n01 + u * (n11 - n01);
        a + v * (b - a)
    }
}

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Multi-octave Perlin noise rescaled so its minimum is 0 and maximum 1.
/// `cells_per_axis` lattice cells span the frame at the base octave.
pub fn perlin_field(
    height: usize,
    width: usize,
    cells_per_axis: usize,
    octaves: usize,
    seed: u64,
) -> Result<DecayMap> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidParameter("perlin field needs a non-empty grid".into()));
    }
    if cells_per_axis == 0 || octaves == 0 {
        return Err(Error::InvalidParameter(
            "perlin field needs cells_per_axis >= 1 and octaves >= 1".into(),
        ));
    }
    let top = LACUNARITY
        .checked_pow(octaves as u32 - 1)
        .and_then(|f| f.checked_mul(cells_per_axis))
        .filter(|&n| n <= MAX_CELLS)
        .ok_or_else(|| {
            Error::InvalidParameter(format!(
                "{cells_per_axis} cells over {octaves} octaves exceeds {MAX_CELLS} lattice cells"
            ))
        })?;
    debug_assert!(top >= cells_per_axis);

    let mut rng = rng_from_seed(seed);
    let mut acc = vec![0.0; height * width];
    let mut n = cells_per_axis;
    let mut amp = 1.0;
    for _ in 0..octaves {
        let lattice = GradientLattice::random(n, &mut rng);
        for r in 0..height {
            let y = (r as f64 + 0.5) / height as f64 * n as f64;
            for c in 0..width {
                let x = (c as f64 + 0.5) / width as f64 * n as f64;
                acc[r * width + c] += amp * lattice.noise(x, y);
            }
        }
        n *= LACUNARITY;
        amp *= PERSISTENCE;
    }

    let lo = acc.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let data = if span > 1e-15 {
        acc.iter().map(|v| ((v - lo) / span).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; acc.len()]
    };
    Ok(DecayMap::from_raw(height, width, data))
}
