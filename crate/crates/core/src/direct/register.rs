use crate::error::{Error, Result};
use crate::filter::downsample2;
use crate::image::warp::{center, in_bounds, sample_with_grad, warp_slice};
use crate::image::{ensure_same_dims, AffineMatrix, AffineParams, ImageGrid};

use super::grid_search::{search, GridCost};
use super::phase::phase_correlation;
use super::DirectConfig;

const DEG: f64 = std::f64::consts::PI / 180.0;
/// Coarsest pyramid level keeps at least this many pixels per side.
const MIN_LEVEL_SIDE: usize = 32;
/// Below this peak height phase correlation is not trusted.
const PHASE_MIN_STRENGTH: f64 = 0.05;
/// Fewer valid pixels than this and the cost is undefined.
const MIN_VALID: usize = 16;

/// Registration outcome at full resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Registration {
    pub params: AffineParams,
    /// `1 − NCC` over the valid overlap, in `[0, 2]`.
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// `1 − NCC` cost with its Gauss-Newton gradient and normal matrix.
#[derive(Debug, Clone, Copy)]
pub struct CostTerms {
    pub cost: f64,
    pub grad: [f64; 3],
    pub normal: [[f64; 3]; 3],
    pub valid: usize,
}

struct Level {
    moving: Vec<f64>,
    fixed: Vec<f64>,
    height: usize,
    width: usize,
}

impl Level {
    /// Parameter order is `(θ°, tx, ty)`; translations in this level's pixels.
    fn terms(&self, p: [f64; 3]) -> Option<CostTerms> {
        let (h, w) = (self.height, self.width);
        let (cx, cy) = center(h, w);
        let (s, c) = (p[0] * DEG).sin_cos();
        let mut vals = Vec::with_capacity(h * w);
        let mut jac = Vec::with_capacity(h * w);
        let mut tgt = Vec::with_capacity(h * w);
        for r in 0..h {
            let dv = r as f64 - cy - p[2];
            for col in 0..w {
                let du = col as f64 - cx - p[1];
                let su = c * du + s * dv;
                let sv = -s * du + c * dv;
                let (x, y) = (su + cx, sv + cy);
                if !in_bounds(x, y, h, w) {
                    continue;
                }
                let (v, gx, gy) = sample_with_grad(&self.moving, h, w, x, y, 0.0);
                vals.push(v);
                tgt.push(self.fixed[r * w + col]);
                jac.push([
                    (gx * sv - gy * su) * DEG,
                    -gx * c + gy * s,
                    -gx * s - gy * c,
                ]);
            }
        }
        let n = vals.len();
        if n < MIN_VALID {
            return None;
        }
        let nf = n as f64;
        let mw = vals.iter().sum::<f64>() / nf;
        let mz = tgt.iter().sum::<f64>() / nf;
        let mut mj = [0.0; 3];
        for j in &jac {
            for k in 0..3 {
                mj[k] += j[k] / nf;
            }
        }
        let na = vals.iter().map(|v| (v - mw).powi(2)).sum::<f64>().sqrt();
        let nb = tgt.iter().map(|v| (v - mz).powi(2)).sum::<f64>().sqrt();
        if na < 1e-12 || nb < 1e-12 {
            return None;
        }
        let mut ncc = 0.0;
        let mut pw = [0.0; 3];
        let mut qz = [0.0; 3];
        let mut sjj = [[0.0; 3]; 3];
        for i in 0..n {
            let wh = (vals[i] - mw) / na;
            let zh = (tgt[i] - mz) / nb;
            ncc += wh * zh;
            let jc = [jac[i][0] - mj[0], jac[i][1] - mj[1], jac[i][2] - mj[2]];
            for a in 0..3 {
                pw[a] += wh * jc[a];
                qz[a] += zh * jc[a];
                for b in a..3 {
                    sjj[a][b] += jc[a] * jc[b];
                }
            }
        }
        let mut grad = [0.0; 3];
        let mut normal = [[0.0; 3]; 3];
        for a in 0..3 {
            grad[a] = (pw[a] * ncc - qz[a]) / na;
            for b in a..3 {
                normal[a][b] = (sjj[a][b] - pw[a] * pw[b]) / (na * na);
                normal[b][a] = normal[a][b];
            }
        }
        Some(CostTerms {
            cost: 1.0 - ncc,
            grad,
            normal,
            valid: n,
        })
    }
}

/// Cost terms of explaining `fixed` as `moving` warped by `params`, at full
/// resolution. `None` when the overlap or either image is degenerate.
pub fn ncc_cost_terms(moving: &ImageGrid, fixed: &ImageGrid, params: &AffineParams) -> Result<Option<CostTerms>> {
    ensure_same_dims(moving.dims(), fixed.dims())?;
    let level = Level {
        moving: moving.as_slice().to_vec(),
        fixed: fixed.as_slice().to_vec(),
        height: moving.height(),
        width: moving.width(),
    };
    Ok(level.terms([params.theta_deg, params.tx_px, params.ty_px]))
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if !d.is_finite() || d.abs() < 1e-300 {
        return None;
    }
    let mut x = [0.0; 3];
    for k in 0..3 {
        let mut m = a;
        for r in 0..3 {
            m[r][k] = b[r];
        }
        x[k] = det(m) / d;
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

struct LevelFit {
    params: [f64; 3],
    cost: f64,
    converged: bool,
    iterations: usize,
}

/// Damped Gauss-Newton with step halving. `tol_px` is in this level's pixels.
fn gauss_newton(level: &Level, start: [f64; 3], max_iters: usize, tol_px: f64, tol_deg: f64) -> LevelFit {
    let mut p = start;
    let mut terms = level.terms(p);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        let Some(t) = terms else { break };
        iterations += 1;
        let mut a = t.normal;
        for k in 0..3 {
            a[k][k] += 1e-6 * a[k][k].max(1e-12);
        }
        let Some(delta) = solve3(a, [-t.grad[0], -t.grad[1], -t.grad[2]]) else {
            break;
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..8 {
            let q = [p[0] + step * delta[0], p[1] + step * delta[1], p[2] + step * delta[2]];
            if q[0].abs() < 90.0 {
                if let Some(nt) = level.terms(q) {
                    if nt.cost <= t.cost {
                        accepted = Some((q, nt));
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        let small = |d: [f64; 3], s: f64| {
            (s * d[0]).abs() < tol_deg && (s * d[1]).abs() < tol_px && (s * d[2]).abs() < tol_px
        };
        match accepted {
            Some((q, nt)) => {
                p = q;
                terms = Some(nt);
                if small(delta, step) {
                    converged = true;
                    break;
                }
            }
            None => {
                // No descent left along the Gauss-Newton direction.
                converged = small(delta, 1.0) || t.grad.iter().all(|g| g.abs() < 1e-9);
                if !converged {
                    converged = small(delta, step);
                }
                break;
            }
        }
    }
    LevelFit {
        params: p,
        cost: terms.map_or(f64::INFINITY, |t| t.cost),
        converged,
        iterations,
    }
}

fn build_pyramid(moving: &ImageGrid, fixed: &ImageGrid, levels: usize) -> Vec<Level> {
    let (h, w) = moving.dims();
    let mut out = vec![Level {
        moving: moving.as_slice().to_vec(),
        fixed: fixed.as_slice().to_vec(),
        height: h,
        width: w,
    }];
    while out.len() < levels {
        let last = out.last().unwrap();
        if last.height / 2 < MIN_LEVEL_SIDE || last.width / 2 < MIN_LEVEL_SIDE {
            break;
        }
        let (m, h2, w2) = downsample2(&last.moving, last.height, last.width);
        let (f, _, _) = downsample2(&last.fixed, last.height, last.width);
        out.push(Level {
            moving: m,
            fixed: f,
            height: h2,
            width: w2,
        });
    }
    out
}

/// Translation guess at the coarsest level for a given rotation.
fn initial_translation(level: &Level, theta_deg: f64) -> (f64, f64) {
    let rot = AffineMatrix::from_params(&AffineParams::new(theta_deg, 0.0, 0.0))
        .and_then(|m| m.inverse())
        .expect("rotation is invertible");
    let rotated = warp_slice(&level.moving, level.height, level.width, &rot, 0.0);
    let peak = phase_correlation(&rotated, &level.fixed, level.height, level.width);
    let radius = (level.height.min(level.width) / 4) as f64;
    if peak.strength >= PHASE_MIN_STRENGTH && peak.tx.abs() <= radius && peak.ty.abs() <= radius {
        return (peak.tx, peak.ty);
    }
    let m = search(
        &rotated,
        &level.fixed,
        level.height,
        level.width,
        radius as i64,
        GridCost::Ncc,
    );
    (m.tx as f64, m.ty as f64)
}

fn check_textured(img: &ImageGrid, name: &str) -> Result<()> {
    let mean = img.mean();
    let var = img.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / img.len() as f64;
    if var < 1e-14 {
        return Err(Error::DegenerateInput(format!("{name} has no intensity variation")));
    }
    Ok(())
}

/// Coarse-to-fine refinement from one full-resolution starting point.
fn refine_from(pyramid: &[Level], start: [f64; 3], cfg: &DirectConfig) -> LevelFit {
    let top = pyramid.len() - 1;
    let scale = (1u64 << top) as f64;
    let mut p = [start[0], start[1] / scale, start[2] / scale];
    let mut iterations = 0;
    let mut fit = None;
    for (l, level) in pyramid.iter().enumerate().rev() {
        let s = (1u64 << l) as f64;
        let f = gauss_newton(level, p, cfg.max_gn_iters, cfg.param_tol_px / s, cfg.param_tol_deg);
        iterations += f.iterations;
        p = f.params;
        if l > 0 {
            p[1] *= 2.0;
            p[2] *= 2.0;
        }
        fit = Some(f);
    }
    let mut fit = fit.expect("pyramid is never empty");
    fit.iterations = iterations;
    fit
}

/// Finds the drift that best maps `moving` onto `fixed` under `1 − NCC`,
/// from several rotation starts. Among equal costs the smallest `|θ|`, then
/// the smallest translation wins.
pub fn register_affine(moving: &ImageGrid, fixed: &ImageGrid, cfg: &DirectConfig) -> Result<Registration> {
    ensure_same_dims(moving.dims(), fixed.dims())?;
    cfg.validate()?;
    check_textured(moving, "reference image")?;
    check_textured(fixed, "target image")?;
    let pyramid = build_pyramid(moving, fixed, cfg.pyramid_levels.max(1));
    let coarsest = pyramid.last().unwrap();
    let top_scale = (1u64 << (pyramid.len() - 1)) as f64;

    let mut best: Option<(LevelFit, usize)> = None;
    let mut total_iters = 0;
    for (idx, &theta) in cfg.rotation_starts_deg.iter().enumerate() {
        let (tx, ty) = initial_translation(coarsest, theta);
        let fit = refine_from(&pyramid, [theta, tx * top_scale, ty * top_scale], cfg);
        total_iters += fit.iterations;
        let better = match &best {
            None => true,
            Some((b, _)) => {
                let key = |f: &LevelFit| (f.params[0].abs(), f.params[1].hypot(f.params[2]));
                fit.cost < b.cost || (fit.cost == b.cost && key(&fit) < key(b))
            }
        };
        if better {
            best = Some((fit, idx));
        }
    }
    let (fit, _) = best.ok_or_else(|| Error::InvalidParameter("no rotation starts".into()))?;
    if !fit.cost.is_finite() {
        return Err(Error::DegenerateInput("images do not overlap under any start".into()));
    }
    Ok(Registration {
        params: AffineParams::new(fit.params[0], fit.params[1], fit.params[2]),
        cost: fit.cost,
        converged: fit.converged,
        iterations: total_iters,
    })
}

/// Single-start refinement around `start`; used when the answer is known
/// to be close.
pub(crate) fn refine_affine(
    moving: &ImageGrid,
    fixed: &ImageGrid,
    start: &AffineParams,
    cfg: &DirectConfig,
) -> Result<Registration> {
    ensure_same_dims(moving.dims(), fixed.dims())?;
    check_textured(moving, "reference image")?;
    let pyramid = build_pyramid(moving, fixed, cfg.pyramid_levels.max(1));
    let fit = refine_from(&pyramid, [start.theta_deg, start.tx_px, start.ty_px], cfg);
    if !fit.cost.is_finite() {
        return Err(Error::DegenerateInput("images do not overlap".into()));
    }
    Ok(Registration {
        params: AffineParams::new(fit.params[0], fit.params[1], fit.params[2]),
        cost: fit.cost,
        converged: fit.converged,
        iterations: fit.iterations,
    })
}
