//! Gaussian smoothing, normalized convolution and pyramid decimation.

/// Normalized 1D Gaussian truncated at `3σ`. `sigma == 0` yields `[1]`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-0.5 * d * d / (sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Convolves a 1D signal with zero padding; output has the input length.
pub fn convolve_zero_padded(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let n = signal.len() as isize;
    (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .filter_map(|(j, k)| {
                    let src = i + j as isize - r;
                    (0..n).contains(&src).then(|| k * signal[src as usize])
                })
                .sum()
        })
        .collect()
}

/// Separable convolution with zero padding (no renormalization).
pub(crate) fn convolve2d(data: &[f64], height: usize, width: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; data.len()];
    for row in 0..height {
        let line = &data[row * width..(row + 1) * width];
        for c in 0..width {
            let mut acc = 0.0;
            for (j, k) in kernel.iter().enumerate() {
                let src = c as isize + j as isize - r;
                if src >= 0 && (src as usize) < width {
                    acc += k * line[src as usize];
                }
            }
            tmp[row * width + c] = acc;
        }
    }
    let mut out = vec![0.0; data.len()];
    for row in 0..height {
        for (j, k) in kernel.iter().enumerate() {
            let src = row as isize + j as isize - r;
            if src < 0 || src as usize >= height {
                continue;
            }
            let src = src as usize;
            for c in 0..width {
                out[row * width + c] += k * tmp[src * width + c];
            }
        }
    }
    out
}

/// Gaussian blur renormalized by the in-bounds kernel mass, so constants
/// are preserved up to the image border.
pub(crate) fn blur_normalized(data: &[f64], height: usize, width: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return data.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let num = convolve2d(data, height, width, &k);
    let den = convolve2d(&vec![1.0; data.len()], height, width, &k);
    num.iter().zip(&den).map(|(n, d)| n / d).collect()
}

/// Anti-aliased 2x decimation: Gaussian blur (σ = 1) then 2x2 averaging.
/// Centered coordinates scale by exactly 1/2 for even sizes.
pub(crate) fn downsample2(data: &[f64], height: usize, width: usize) -> (Vec<f64>, usize, usize) {
    let blurred = blur_normalized(data, height, width, 1.0);
    let (h2, w2) = (height / 2, width / 2);
    let mut out = Vec::with_capacity(h2 * w2);
    for r in 0..h2 {
        for c in 0..w2 {
            let i = 2 * r * width + 2 * c;
            out.push(0.25 * (blurred[i] + blurred[i + 1] + blurred[i + width] + blurred[i + width + 1]));
        }
    }
    (out, h2, w2)
}
