use crate::error::{Error, Result};
use crate::image::{AffineParams, DecayMap};

/// Maps a `[0, 1]` field onto survival values in `[s_min, 1]`.
pub fn make_final_decay(field: &DecayMap, min_survival: f64) -> Result<DecayMap> {
    if !(0.0..1.0).contains(&min_survival) {
        return Err(Error::OutOfRange {
            what: "min_survival",
            value: min_survival,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let data = field
        .as_slice()
        .iter()
        .map(|f| (min_survival + (1.0 - min_survival) * f).clamp(min_survival, 1.0))
        .collect();
    Ok(DecayMap::from_raw(field.height(), field.width(), data))
}

fn time_fraction(t: f64, total_steps: u32) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::InvalidParameter("total steps must be >= 1".into()));
    }
    let total = total_steps as f64;
    if !(0.0..=total).contains(&t) {
        return Err(Error::OutOfRange {
            what: "t",
            value: t,
            lo: 0.0,
            hi: total,
        });
    }
    Ok(t / total)
}

/// `λ_t = 1 − (t/T)(1 − λ_T)`: all ones at `t = 0`, exactly `λ_T` at `t = T`.
pub fn interpolate_decay(lambda_final: &DecayMap, t: f64, total_steps: u32) -> Result<DecayMap> {
    let f = time_fraction(t, total_steps)?;
    let (h, w) = lambda_final.dims();
    if f == 0.0 {
        return Ok(DecayMap::ones(h, w));
    }
    if f == 1.0 {
        return Ok(lambda_final.clone());
    }
    let data = lambda_final
        .as_slice()
        .iter()
        .map(|l| (1.0 - f * (1.0 - l)).clamp(*l, 1.0))
        .collect();
    Ok(DecayMap::from_raw(h, w, data))
}

/// Scales `(θ, tx, ty)` by `t/T`; the rebuilt matrix stays rigid.
pub fn interpolate_affine(affine_final: &AffineParams, t: f64, total_steps: u32) -> Result<AffineParams> {
    let f = time_fraction(t, total_steps)?;
    if f == 1.0 {
        return Ok(*affine_final);
    }
    Ok(AffineParams {
        theta_deg: f * affine_final.theta_deg,
        tx_px: f * affine_final.tx_px,
        ty_px: f * affine_final.ty_px,
    })
}

/// Shapes a damage pattern `shape` (any non-negative field) into a decay map
/// whose mean damage `mean(1 − λ)` equals `intensity`.
///
/// The normalized pattern `s = shape / max(shape)` is scaled linearly while
/// that suffices; beyond `mean(s)` a uniform loss component is blended in.
pub fn decay_with_intensity(shape: &[f64], height: usize, width: usize, intensity: f64) -> Result<DecayMap> {
    if !(0.0..=1.0).contains(&intensity) {
        return Err(Error::OutOfRange {
            what: "damage intensity",
            value: intensity,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if shape.len() != height * width || shape.is_empty() {
        return Err(Error::dims((height, width), (shape.len(), 1)));
    }
    let peak = shape.iter().copied().fold(0.0, f64::max);
    let normalized: Vec<f64> = if peak > 0.0 {
        shape.iter().map(|v| (v.max(0.0) / peak).min(1.0)).collect()
    } else {
        vec![1.0; shape.len()]
    };
    let m = normalized.iter().sum::<f64>() / normalized.len() as f64;
    let damage: Vec<f64> = if intensity <= m {
        let k = intensity / m;
        normalized.iter().map(|s| k * s).collect()
    } else {
        let u = (intensity - m) / (1.0 - m);
        normalized.iter().map(|s| u + (1.0 - u) * s).collect()
    };
    let data = damage.iter().map(|d| (1.0 - d).clamp(0.0, 1.0)).collect();
    Ok(DecayMap::from_raw(height, width, data))
}
