use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::rng::rng_from_seed;

/// Parameters of a synthetic atom-column map: Gaussian blobs on a jittered
/// 2D lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AtomMapSpec {
    /// First lattice vector `(dx, dy)`, pixels.
    pub lattice_a: [f64; 2],
    /// Second lattice vector, pixels.
    pub lattice_b: [f64; 2],
    /// Lattice origin in centered coordinates.
    pub origin: [f64; 2],
    /// Blob peak amplitudes are drawn uniformly from this range.
    pub amplitude_range: [f64; 2],
    /// Blob Gaussian σ (pixels) drawn uniformly from this range.
    pub width_range: [f64; 2],
    /// Std-dev of the per-atom positional jitter, pixels.
    pub jitter_sigma: f64,
    pub seed: u64,
}

impl Default for AtomMapSpec {
    fn default() -> Self {
        Self {
            lattice_a: [12.0, 0.0],
            lattice_b: [6.0, 10.392_304_845_413_264],
            origin: [0.0, 0.0],
            amplitude_range: [0.45, 1.0],
            width_range: [2.0, 2.8],
            jitter_sigma: 0.4,
            seed: 0,
        }
    }
}

/// Refuses lattices that would place an absurd number of atoms.
const MAX_ATOMS: f64 = 4.0e6;

impl AtomMapSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = self
            .lattice_a
            .iter()
            .chain(&self.lattice_b)
            .chain(&self.origin)
            .chain(&self.amplitude_range)
            .chain(&self.width_range)
            .chain(std::iter::once(&self.jitter_sigma))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("atom map spec has non-finite values".into()));
        }
        let [alo, ahi] = self.amplitude_range;
        if !(0.0..=1.0).contains(&alo) || !(0.0..=1.0).contains(&ahi) || alo > ahi {
            return Err(Error::InvalidParameter(format!(
                "amplitude range [{alo}, {ahi}] must be an ordered sub-range of [0, 1]"
            )));
        }
        let [wlo, whi] = self.width_range;
        if wlo <= 0.0 || wlo > whi {
            return Err(Error::InvalidParameter(format!(
                "blob width range [{wlo}, {whi}] must be ordered and positive"
            )));
        }
        if self.jitter_sigma < 0.0 {
            return Err(Error::InvalidParameter("jitter sigma must be >= 0".into()));
        }
        let [ax, ay] = self.lattice_a;
        let [bx, by] = self.lattice_b;
        let cross = ax * by - ay * bx;
        let scale = ax.hypot(ay) * bx.hypot(by);
        if !(cross.abs() > 1e-9 * scale) || scale == 0.0 {
            return Err(Error::InvalidParameter(
                "lattice vectors are parallel or zero".into(),
            ));
        }
        Ok(())
    }
}

/// Renders an atom map; deterministic for a given spec (including seed).
pub fn gen_atom_map(spec: &AtomMapSpec, height: usize, width: usize) -> Result<ImageGrid> {
    if height < 32 || width < 32 {
        return Err(Error::InvalidParameter(format!(
            "atom maps need at least 32x32 pixels, got {height}x{width}"
        )));
    }
    spec.validate()?;
    let [ax, ay] = spec.lattice_a;
    let [bx, by] = spec.lattice_b;
    let det = ax * by - ay * bx;
    let cx = (width as f64 - 1.0) * 0.5;
    let cy = (height as f64 - 1.0) * 0.5;
    let margin = 4.0 * spec.width_range[1] + 4.0 * spec.jitter_sigma + 1.0;

    // lattice index range covering the padded frame
    let (mut imin, mut imax, mut jmin, mut jmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (u, v) in [
        (-cx - margin, -cy - margin),
        (cx + margin, -cy - margin),
        (-cx - margin, cy + margin),
        (cx + margin, cy + margin),
    ] {
        let du = u - spec.origin[0];
        let dv = v - spec.origin[1];
        let i = (du * by - dv * bx) / det;
        let j = (ax * dv - ay * du) / det;
        imin = imin.min(i);
        imax = imax.max(i);
        jmin = jmin.min(j);
        jmax = jmax.max(j);
    }
    let (imin, imax) = (imin.floor() as i64, imax.ceil() as i64);
    let (jmin, jmax) = (jmin.floor() as i64, jmax.ceil() as i64);
    let count = (imax - imin + 1) as f64 * (jmax - jmin + 1) as f64;
    if count > MAX_ATOMS {
        return Err(Error::InvalidParameter(format!(
            "lattice too dense: {count:.0} atoms"
        )));
    }

    let mut rng = rng_from_seed(spec.seed);
    let mut data = vec![0.0; height * width];
    let [alo, ahi] = spec.amplitude_range;
    let [wlo, whi] = spec.width_range;
    for i in imin..=imax {
        for j in jmin..=jmax {
            let jx: f64 = rng.sample(StandardNormal);
            let jy: f64 = rng.sample(StandardNormal);
            let amp = alo + (ahi - alo) * rng.random::<f64>();
            let sigma = wlo + (whi - wlo) * rng.random::<f64>();
            let u = spec.origin[0] + i as f64 * ax + j as f64 * bx + spec.jitter_sigma * jx;
            let v = spec.origin[1] + i as f64 * ay + j as f64 * by + spec.jitter_sigma * jy;
            if amp == 0.0 {
                continue;
            }
            splat(&mut data, height, width, u + cx, v + cy, amp, sigma);
        }
    }
    for v in &mut data {
        *v = v.clamp(0.0, 1.0);
    }
    ImageGrid::new(height, width, data)
}

fn splat(data: &mut [f64], height: usize, width: usize, x: f64, y: f64, amp: f64, sigma: f64) {
    let reach = 4.0 * sigma;
    let c0 = (x - reach).floor().max(0.0) as usize;
    let c1 = (x + reach).ceil().min(width as f64 - 1.0);
    let r0 = (y - reach).floor().max(0.0) as usize;
    let r1 = (y + reach).ceil().min(height as f64 - 1.0);
    if c1 < 0.0 || r1 < 0.0 {
        return;
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    for r in r0..=r1 as usize {
        let dy = r as f64 - y;
        for c in c0..=c1 as usize {
            let dx = c as f64 - x;
            data[r * width + c] += amp * (-(dx * dx + dy * dy) * inv).exp();
        }
    }
}
