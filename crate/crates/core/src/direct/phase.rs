use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Translation estimate from normalized cross-power spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PhasePeak {
    pub tx: f64,
    pub ty: f64,
    /// Correlation peak relative to a perfect match, in `[0, 1]`.
    pub strength: f64,
}

/// Regularizer of the cross-power normalization, relative to its peak.
const SPECTRAL_FLOOR: f64 = 1e-3;

fn hann(n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![1.0; n];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

fn fft2(buf: &mut [Complex64], height: usize, width: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
    } else {
        (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
    };
    for row in buf.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let mut col = vec![Complex64::default(); height];
    for c in 0..width {
        for r in 0..height {
            col[r] = buf[r * width + c];
        }
        col_fft.process(&mut col);
        for r in 0..height {
            buf[r * width + c] = col[r];
        }
    }
}

fn windowed_spectrum(data: &[f64], height: usize, width: usize, wy: &[f64], wx: &[f64]) -> Vec<Complex64> {
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    let mut buf: Vec<Complex64> = data
        .iter()
        .enumerate()
        .map(|(i, v)| Complex64::new((v - mean) * wy[i / width] * wx[i % width], 0.0))
        .collect();
    fft2(&mut buf, height, width, false);
    buf
}

/// Parabolic sub-sample offset of a peak from its two neighbours.
fn refine(left: f64, mid: f64, right: f64) -> f64 {
    let den = left - 2.0 * mid + right;
    if den >= -1e-15 {
        0.0
    } else {
        (0.5 * (left - right) / den).clamp(-0.5, 0.5)
    }
}

/// Shift `t` such that `b(p) ≈ a(p − t)`.
pub(crate) fn phase_correlation(a: &[f64], b: &[f64], height: usize, width: usize) -> PhasePeak {
    let wy = hann(height);
    let wx = hann(width);
    let fa = windowed_spectrum(a, height, width, &wy, &wx);
    let fb = windowed_spectrum(b, height, width, &wy, &wx);
    let mut cross: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x.conj() * y).collect();
    // Whitening bins with almost no energy only amplifies edge artifacts.
    let floor = SPECTRAL_FLOOR * cross.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let mut attainable = 0.0;
    for p in &mut cross {
        let n = p.norm();
        attainable += n / (n + floor + 1e-300);
        *p /= n + floor + 1e-300;
    }
    fft2(&mut cross, height, width, true);
    let scale = 1.0 / (height * width) as f64;
    let surface: Vec<f64> = cross.iter().map(|c| c.re * scale).collect();

    let (mut best, mut best_i) = (f64::NEG_INFINITY, 0);
    for (i, &v) in surface.iter().enumerate() {
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let (pr, pc) = (best_i / width, best_i % width);
    let at = |r: usize, c: usize| surface[r * width + c];
    let dy = refine(
        at((pr + height - 1) % height, pc),
        best,
        at((pr + 1) % height, pc),
    );
    let dx = refine(at(pr, (pc + width - 1) % width), best, at(pr, (pc + 1) % width));
    let wrap = |k: usize, n: usize| if k > n / 2 { k as f64 - n as f64 } else { k as f64 };
    PhasePeak {
        tx: wrap(pc, width) + dx,
        ty: wrap(pr, height) + dy,
        strength: if attainable > 0.0 {
            (best / (attainable * scale)).clamp(0.0, 1.0)
        } else {
            0.0
        },
    }
}
