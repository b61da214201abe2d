//! Damage intensity, regression statistics over intensity curves, drift and
//! rotation errors, and Gaussian-smoothed side profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{convolve_zero_padded, gaussian_kernel};
use crate::image::{ensure_same_dims, AffineParams, DecayMap, ImageGrid};

/// Mean signal loss `mean(1 − λ)`.
pub fn damage_intensity(lam: &DecayMap) -> Result<f64> {
    if lam.as_slice().is_empty() {
        return Err(Error::InvalidParameter("empty decay map".into()));
    }
    let n = lam.as_slice().len() as f64;
    Ok(lam.as_slice().iter().map(|l| 1.0 - l).sum::<f64>() / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub r2: f64,
    /// Sample variance (divisor `n − 1`) of `pred − gt`.
    pub var_err: f64,
}

impl RegressionReport {
    /// Elementwise mean of several reports (e.g. over seeded trials).
    pub fn mean_of(reports: &[RegressionReport]) -> Option<RegressionReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let sum = |f: fn(&RegressionReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(RegressionReport {
            mae: sum(|r| r.mae),
            mse: sum(|r| r.mse),
            rmse: sum(|r| r.rmse),
            r2: sum(|r| r.r2),
            var_err: sum(|r| r.var_err),
        })
    }
}

pub fn regression_report(pred: &[f64], gt: &[f64]) -> Result<RegressionReport> {
    if pred.len() != gt.len() {
        return Err(Error::Dimension {
            expected: format!("{} predictions", gt.len()),
            actual: format!("{}", pred.len()),
        });
    }
    let n = gt.len();
    if n < 2 {
        return Err(Error::InvalidParameter("regression needs at least two points".into()));
    }
    let nf = n as f64;
    let errs: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| p - g).collect();
    let mae = errs.iter().map(|e| e.abs()).sum::<f64>() / nf;
    let ss_res: f64 = errs.iter().map(|e| e * e).sum();
    let mse = ss_res / nf;
    let gt_mean = gt.iter().sum::<f64>() / nf;
    let ss_tot: f64 = gt.iter().map(|g| (g - gt_mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::DegenerateInput(
            "ground-truth series is constant; R² is undefined".into(),
        ));
    }
    let err_mean = errs.iter().sum::<f64>() / nf;
    let var_err = errs.iter().map(|e| (e - err_mean).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok(RegressionReport {
        mae,
        mse,
        rmse: mse.sqrt(),
        r2: 1.0 - ss_res / ss_tot,
        var_err,
    })
}

/// L1 translation error `|t̂x − tx| + |t̂y − ty|`, pixels.
pub fn drift_error(pred: &AffineParams, gt: &AffineParams) -> f64 {
    (pred.tx_px - gt.tx_px).abs() + (pred.ty_px - gt.ty_px).abs()
}

/// Absolute rotation difference wrapped into `[0, 180]` degrees.
pub fn rotation_error(pred: &AffineParams, gt: &AffineParams) -> f64 {
    let d = (pred.theta_deg - gt.theta_deg).rem_euclid(360.0);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

/// Row `row` of both images, each smoothed by a truncated Gaussian.
pub fn side_profile(a: &ImageGrid, b: &ImageGrid, row: usize, sigma: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure_same_dims(a.dims(), b.dims())?;
    if row >= a.height() {
        return Err(Error::OutOfRange {
            what: "row",
            value: row as f64,
            lo: 0.0,
            hi: a.height() as f64 - 1.0,
        });
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma {sigma} must be >= 0")));
    }
    Ok((smooth_profile(a.row(row), sigma), smooth_profile(b.row(row), sigma)))
}

/// Gaussian smoothing renormalized near the ends (constants are preserved).
pub fn smooth_profile(signal: &[f64], sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return signal.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let num = convolve_zero_padded(signal, &k);
    let den = convolve_zero_padded(&vec![1.0; signal.len()], &k);
    num.iter().zip(&den).map(|(n, d)| n / d).collect()
}

/// Lag `L` in `[-max_lag, max_lag]` maximizing `Σ a[i] · b[i + L]` over
/// the mean-removed signals (`b` shifted right of `a` gives positive lag).
pub fn best_lag(a: &[f64], b: &[f64], max_lag: usize) -> isize {
    let ma = a.iter().sum::<f64>() / a.len().max(1) as f64;
    let mb = b.iter().sum::<f64>() / b.len().max(1) as f64;
    let mut best = (0isize, f64::NEG_INFINITY);
    let max_lag = max_lag as isize;
    for lag in -max_lag..=max_lag {
        let mut acc = 0.0;
        let mut count = 0usize;
        for (i, av) in a.iter().enumerate() {
            let j = i as isize + lag;
            if j >= 0 && (j as usize) < b.len() {
                acc += (av - ma) * (b[j as usize] - mb);
                count += 1;
            }
        }
        if count == 0 {
            continue;
        }
        let score = acc / count as f64;
        if score > best.1 || (score == best.1 && lag.abs() < best.0.abs()) {
            best = (lag, score);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn intensity_cases() {
        assert_eq!(damage_intensity(&DecayMap::ones(4, 4)).unwrap(), 0.0);
        let d = damage_intensity(&DecayMap::uniform(3, 3, 0.1).unwrap()).unwrap();
        assert!((d - 0.9).abs() < 1e-15);
        assert!(damage_intensity(&DecayMap::ones(0, 0)).is_err());
    }

    #[test]
    fn regression_exact_and_biased() {
        let gt: Vec<f64> = (0..10).map(|k| 0.1 * k as f64).collect();
        let r = regression_report(&gt, &gt).unwrap();
        assert_eq!((r.mae, r.mse, r.rmse, r.r2, r.var_err), (0.0, 0.0, 0.0, 1.0, 0.0));
        let pred: Vec<f64> = gt.iter().map(|g| g + 0.1).collect();
        let r = regression_report(&pred, &gt).unwrap();
        assert!((r.mae - 0.1).abs() < 1e-12);
        assert!((r.mse - 0.01).abs() < 1e-12);
        assert!(r.var_err < 1e-20);
        assert!(regression_report(&[0.1, 0.2], &[0.5, 0.5]).is_err());
        assert!(regression_report(&[0.1], &[0.5]).is_err());
        assert!(regression_report(&[0.1, 0.2], &[0.5]).is_err());
    }

    #[test]
    fn drift_and_rotation_errors() {
        let a = AffineParams::new(0.0, 3.0, -1.0);
        let b = AffineParams::new(0.0, 1.0, 1.0);
        assert_eq!(drift_error(&a, &b), 4.0);
        assert_eq!(drift_error(&a, &a), 0.0);
        let r = rotation_error(&AffineParams::new(179.0, 0.0, 0.0), &AffineParams::new(-179.0, 0.0, 0.0));
        assert!((r - 2.0).abs() < 1e-12);
        let r = rotation_error(&AffineParams::new(10.5, 0.0, 0.0), &AffineParams::new(10.0, 0.0, 0.0));
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn profiles() {
        let a = ImageGrid::from_fn(3, 40, |_, c| ((c as f64) * 0.7).sin() * 0.5 + 0.5).unwrap();
        let (pa, pb) = side_profile(&a, &a, 1, 0.0).unwrap();
        assert_eq!(pa, a.row(1));
        assert_eq!(pb, a.row(1));
        let flat = ImageGrid::filled(2, 30, 0.25);
        let (pf, _) = side_profile(&flat, &flat, 0, 2.0).unwrap();
        assert!(pf.iter().all(|v| (v - 0.25).abs() < 1e-12));
        let (sa, sb) = side_profile(&a, &a, 2, 1.5).unwrap();
        assert_eq!(best_lag(&sa, &sb, 5), 0);
        assert!(side_profile(&a, &a, 3, 1.0).is_err());
    }

    #[test]
    fn lag_of_shifted_signal() {
        let a: Vec<f64> = (0..80).map(|i| (-(i as f64 - 30.0).powi(2) / 8.0).exp()).collect();
        let b: Vec<f64> = (0..80).map(|i| (-(i as f64 - 35.0).powi(2) / 8.0).exp()).collect();
        assert_eq!(best_lag(&a, &b, 10), 5);
    }

    proptest! {
        #[test]
        fn intensity_scales_with_damage(c in 0.0f64..=1.0, seed in 0u64..50) {
            let data: Vec<f64> = (0..64).map(|i| ((i as u64 * 7919 + seed * 31) % 101) as f64 / 100.0).collect();
            let lam = DecayMap::new(8, 8, data.clone()).unwrap();
            let scaled = DecayMap::new(8, 8, data.iter().map(|l| 1.0 - c * (1.0 - l)).collect()).unwrap();
            let lhs = damage_intensity(&scaled).unwrap();
            let rhs = c * damage_intensity(&lam).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn errors_symmetric_non_negative(a in -170.0f64..170.0, b in -170.0f64..170.0, x in -50.0f64..50.0, y in -50.0f64..50.0) {
            let p = AffineParams::new(a, x, y);
            let q = AffineParams::new(b, y, x);
            prop_assert!(drift_error(&p, &q) >= 0.0);
            prop_assert_eq!(drift_error(&p, &q), drift_error(&q, &p));
            prop_assert!((rotation_error(&p, &q) - rotation_error(&q, &p)).abs() < 1e-9);
            prop_assert!((0.0..=180.0).contains(&rotation_error(&p, &q)));
            prop_assert_eq!(rotation_error(&p, &p), 0.0);
        }

        #[test]
        fn regression_invariants(vals in proptest::collection::vec(0.0f64..1.0, 3..20), noise in proptest::collection::vec(-0.1f64..0.1, 20)) {
            let gt: Vec<f64> = vals.iter().enumerate().map(|(i, v)| v + i as f64).collect();
            let pred: Vec<f64> = gt.iter().zip(&noise).map(|(g, n)| g + n).collect();
            let r = regression_report(&pred, &gt).unwrap();
            prop_assert!((r.rmse - r.mse.sqrt()).abs() < 1e-12);
            prop_assert!(r.mae <= r.rmse + 1e-15);
            prop_assert!(r.r2 <= 1.0);
        }

        #[test]
        fn smoothing_preserves_mass(pos in 15usize..45, sigma in 0.3f64..3.0) {
            let mut s = vec![0.0; 60];
            s[pos] = 1.0;
            let out = convolve_zero_padded(&s, &gaussian_kernel(sigma));
            prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
}
