use crate::error::{Error, Result};
use crate::filter::{blur_normalized, convolve2d, gaussian_kernel};
use crate::image::{build_affine_matrix, ensure_same_dims, warp_with_mask, AffineParams, DecayMap, ImageGrid};

use super::DirectConfig;

/// Recovers the survival map given a known drift. The target is pulled back
/// into the reference frame; survival at each pixel is the ratio of
/// Gaussian-weighted local sums of pulled-back target and reference over the
/// pixels where the reference is bright enough. Local sums are used instead of
/// per-pixel quotients because resampling moves mass between neighbouring
/// pixels but preserves it locally. Pixels with no usable neighbour get 1.
///
/// Returns the map and the fraction of directly observed pixels.
pub fn decay_from_pair(
    x0: &ImageGrid,
    xt: &ImageGrid,
    affine: &AffineParams,
    cfg: &DirectConfig,
) -> Result<(DecayMap, f64)> {
    ensure_same_dims(x0.dims(), xt.dims())?;
    if !(cfg.eps_denom > 0.0) {
        return Err(Error::InvalidParameter("eps_denom must be positive".into()));
    }
    let inv = build_affine_matrix(affine)?.inverse()?;
    let (pulled, inside) = warp_with_mask(xt, &inv, 0.0)?;
    let (h, w) = x0.dims();
    let n = h * w;
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    let mut observed = 0usize;
    for i in 0..n {
        let d = x0.as_slice()[i];
        if inside[i] && d > cfg.eps_denom {
            observed += 1;
            num[i] = pulled.as_slice()[i];
            den[i] = d;
        }
    }
    let kernel = gaussian_kernel(cfg.lambda_smooth_sigma);
    let num = convolve2d(&num, h, w, &kernel);
    let den = convolve2d(&den, h, w, &kernel);
    let known: Vec<bool> = den.iter().map(|&b| b > 1e-12).collect();
    let mut ratio: Vec<f64> = num
        .iter()
        .zip(&den)
        .map(|(a, b)| if *b > 1e-12 { (a / b).clamp(0.0, 1.0) } else { 1.0 })
        .collect();
    fill_unknown(&mut ratio, &known, h, w);
    if cfg.smooth_decay {
        ratio = blur_normalized(&ratio, h, w, cfg.lambda_smooth_sigma);
        for v in &mut ratio {
            *v = v.clamp(0.0, 1.0);
        }
    }
    Ok((DecayMap::from_raw(h, w, ratio), observed as f64 / n as f64))
}

/// Extends known values into regions out of view of the target by
/// push-pull: known mass is pooled up a 2x2 pyramid and unknown pixels take
/// the mean of their nearest populated ancestor. Leaves `values` untouched
/// when nothing is known.
fn fill_unknown(values: &mut [f64], known: &[bool], height: usize, width: usize) {
    if known.iter().all(|&k| k) || !known.iter().any(|&k| k) {
        return;
    }
    let mut levels = vec![(
        values.iter().zip(known).map(|(v, &k)| if k { *v } else { 0.0 }).collect::<Vec<_>>(),
        known.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect::<Vec<f64>>(),
        height,
        width,
    )];
    while levels.last().map_or(false, |l| l.2 > 1 || l.3 > 1) {
        let (mass, weight, h, w) = levels.last().unwrap();
        let (h2, w2) = (h.div_ceil(2), w.div_ceil(2));
        let mut m2 = vec![0.0; h2 * w2];
        let mut w2v = vec![0.0; h2 * w2];
        for r in 0..*h {
            for c in 0..*w {
                let j = (r / 2) * w2 + c / 2;
                m2[j] += mass[r * w + c];
                w2v[j] += weight[r * w + c];
            }
        }
        levels.push((m2, w2v, h2, w2));
    }
    // Pull: resolve every level top-down into a mean field.
    let top = levels.len() - 1;
    let mut means = vec![levels[top].0[0] / levels[top].1[0]];
    for l in (0..top).rev() {
        let (mass, weight, h, w) = &levels[l];
        let pw = levels[l + 1].3;
        let mut cur = vec![0.0; h * w];
        for r in 0..*h {
            for c in 0..*w {
                let i = r * w + c;
                cur[i] = if weight[i] > 0.0 {
                    mass[i] / weight[i]
                } else {
                    means[(r / 2) * pw + c / 2]
                };
            }
        }
        means = cur;
    }
    for i in 0..values.len() {
        if !known[i] {
            values[i] = means[i].clamp(0.0, 1.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{attenuate, degrade_forward};
    use crate::synth::{gen_atom_map, perlin_field, AtomMapSpec};

    fn raw() -> DirectConfig {
        DirectConfig {
            smooth_decay: false,
            ..DirectConfig::default()
        }
    }

    #[test]
    fn uniform_scaling_is_recovered_on_support() {
        let x0 = gen_atom_map(&AtomMapSpec::default(), 64, 64).unwrap();
        let xt = x0.scaled(0.3).unwrap();
        let cfg = raw();
        let (lam, frac) = decay_from_pair(&x0, &xt, &AffineParams::IDENTITY, &cfg).unwrap();
        assert!(frac > 0.0);
        for i in 0..x0.len() {
            if x0.as_slice()[i] > cfg.eps_denom {
                assert!((lam.as_slice()[i] - 0.3).abs() < 0.01);
            }
        }
    }

    #[test]
    fn empty_support_gives_ones() {
        let x0 = ImageGrid::zeros(32, 32);
        let (lam, frac) = decay_from_pair(&x0, &x0, &AffineParams::IDENTITY, &raw()).unwrap();
        assert_eq!(frac, 0.0);
        assert!(lam.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn push_pull_fills_from_nearest_known_block() {
        let mut v = vec![0.0; 16];
        let mut known = vec![false; 16];
        for (i, val) in [(0, 0.2), (1, 0.4)] {
            v[i] = val;
            known[i] = true;
        }
        fill_unknown(&mut v, &known, 4, 4);
        assert_eq!(&v[..2], &[0.2, 0.4]);
        assert!((v[4] - 0.3).abs() < 1e-12);
        assert!(v.iter().all(|x| (0.2..=0.4).contains(x)));
    }

    #[test]
    fn smooth_field_under_drift() {
        let x0 = gen_atom_map(&AtomMapSpec::default(), 96, 96).unwrap();
        let field = perlin_field(96, 96, 3, 2, 5).unwrap();
        let lam = DecayMap::from_raw(96, 96, field.as_slice().iter().map(|f| 0.4 + 0.6 * f).collect());
        let params = AffineParams::new(2.0, 3.0, -1.5);
        let xt = degrade_forward(&x0, &lam, &params, 0.0).unwrap();
        let cfg = DirectConfig::default();
        let (est, _) = decay_from_pair(&x0, &xt, &params, &cfg).unwrap();
        let mut err = 0.0;
        let mut n = 0.0;
        for i in 0..x0.len() {
            if x0.as_slice()[i] > cfg.eps_denom {
                err += (est.as_slice()[i] - lam.as_slice()[i]).abs();
                n += 1.0;
            }
        }
        assert!(err / n < 0.03, "{}", err / n);
        let _ = attenuate(&x0, &est).unwrap();
    }
}
