//! Single-sample layer kernels with hand-written backward passes. Feature
//! maps are channel-major `[c][h][w]` slices.

use crate::real::Real;

#[inline]
pub(crate) fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// SiLU pre-activations with their sigmoids kept for the backward pass.
pub(crate) struct Silu<F> {
    pre: Vec<F>,
    sig: Vec<F>,
}

impl<F: Real> Silu<F> {
    pub fn apply(pre: Vec<F>) -> (Self, Vec<F>) {
        let sig: Vec<F> = pre.iter().map(|&x| sigmoid(x)).collect();
        let act = pre.iter().zip(&sig).map(|(&x, &s)| x * s).collect();
        (Self { pre, sig }, act)
    }

    /// `dx = dy * silu'(pre)`.
    pub fn backward(&self, dy: &[F]) -> Vec<F> {
        self.pre
            .iter()
            .zip(&self.sig)
            .zip(dy)
            .map(|((&x, &s), &g)| g * (s * (F::one() + x * (F::one() - s))))
            .collect()
    }
}

/// Offsets of one convolution's parameters in the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Conv {
    pub weight: usize,
    pub bias: usize,
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
}

pub(crate) struct ConvCache<F> {
    input: Vec<F>,
    height: usize,
    width: usize,
}

/// Column buffers are kept near this many elements so a tile stays in cache.
const TILE_ELEMS: usize = 1 << 18;

impl Conv {
    pub fn weight_len(&self) -> usize {
        self.cout * self.cin * self.kernel * self.kernel
    }

    fn pad(&self) -> usize {
        self.kernel / 2
    }

    fn pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1
    }

    pub fn out_dims(&self, height: usize, width: usize) -> (usize, usize) {
        let p = 2 * self.pad();
        (
            (height + p - self.kernel) / self.stride + 1,
            (width + p - self.kernel) / self.stride + 1,
        )
    }

    /// Output rows per tile.
    fn tile_rows(&self, ho: usize, wo: usize) -> usize {
        if self.pointwise() {
            return ho.max(1);
        }
        let kk = self.cin * self.kernel * self.kernel;
        (TILE_ELEMS / (kk * wo).max(1)).clamp(1, ho.max(1))
    }

    /// Output columns `[lo, hi)` whose tap at kernel column `kx` lands
    /// inside a row of `width` pixels.
    fn valid_cols(&self, kx: usize, width: usize, wo: usize) -> (usize, usize) {
        let (s, pad) = (self.stride, self.pad());
        let lo = (pad.saturating_sub(kx)).div_ceil(s);
        let hi = if width + pad > kx { ((width + pad - kx - 1) / s + 1).min(wo) } else { 0 };
        (lo, hi.max(lo))
    }

    /// Visits every in-bounds `(column-buffer range, input range)` pair of
    /// output rows `rows`; both ranges hold `len` taps, the input one with
    /// stride `self.stride`.
    fn for_each_tap(&self, height: usize, width: usize, rows: std::ops::Range<usize>, mut f: impl FnMut(usize, usize, usize)) {
        let (_, wo) = self.out_dims(height, width);
        let (k, s, pad) = (self.kernel, self.stride, self.pad() as isize);
        let nt = rows.len() * wo;
        for ci in 0..self.cin {
            for ky in 0..k {
                for kx in 0..k {
                    let row = ((ci * k + ky) * k + kx) * nt;
                    let (lo, hi) = self.valid_cols(kx, width, wo);
                    if lo >= hi {
                        continue;
                    }
                    let first = ((lo * s + kx) as isize - pad) as usize;
                    for (r, oy) in rows.clone().enumerate() {
                        let iy = (oy * s) as isize + ky as isize - pad;
                        if iy < 0 || iy >= height as isize {
                            continue;
                        }
                        let src = (ci * height + iy as usize) * width + first;
                        f(row + r * wo + lo, src, hi - lo);
                    }
                }
            }
        }
    }

    fn im2col<F: Real>(&self, x: &[F], height: usize, width: usize, rows: std::ops::Range<usize>, cols: &mut Vec<F>) {
        let (_, wo) = self.out_dims(height, width);
        let kk = self.cin * self.kernel * self.kernel;
        cols.clear();
        cols.resize(kk * rows.len() * wo, F::zero());
        let s = self.stride;
        self.for_each_tap(height, width, rows, |dst, src, len| {
            let dst = &mut cols[dst..dst + len];
            if s == 1 {
                dst.copy_from_slice(&x[src..src + len]);
            } else {
                for (d, v) in dst.iter_mut().zip(x[src..].iter().step_by(s)) {
                    *d = *v;
                }
            }
        });
    }

    fn col2im_add<F: Real>(&self, cols: &[F], height: usize, width: usize, rows: std::ops::Range<usize>, x: &mut [F]) {
        let s = self.stride;
        self.for_each_tap(height, width, rows, |src, dst, len| {
            for (d, &v) in x[dst..].iter_mut().step_by(s).zip(&cols[src..src + len]) {
                *d = *d + v;
            }
        });
    }

    pub fn forward<F: Real>(&self, p: &[F], x: &[F], height: usize, width: usize) -> (Vec<F>, ConvCache<F>) {
        debug_assert_eq!(x.len(), self.cin * height * width);
        let (ho, wo) = self.out_dims(height, width);
        let n = ho * wo;
        let kk = self.cin * self.kernel * self.kernel;
        let weight = &p[self.weight..self.weight + self.weight_len()];
        let mut out = Vec::with_capacity(self.cout * n);
        for co in 0..self.cout {
            out.extend(std::iter::repeat(p[self.bias + co]).take(n));
        }
        let step = self.tile_rows(ho, wo);
        let mut cols = Vec::new();
        for r0 in (0..ho).step_by(step) {
            let rows = r0..(r0 + step).min(ho);
            let nt = rows.len() * wo;
            let b: &[F] = if self.pointwise() {
                &x[r0 * wo..]
            } else {
                self.im2col(x, height, width, rows, &mut cols);
                &cols
            };
            let ldb = if self.pointwise() { n } else { nt };
            F::gemm_strided(self.cout, kk, nt, F::one(), weight, (kk, 1), b, (ldb, 1), F::one(), &mut out[r0 * wo..], n);
        }
        (
            out,
            ConvCache {
                input: x.to_vec(),
                height,
                width,
            },
        )
    }

    /// Accumulates parameter gradients into `grad`; returns the input
    /// gradient when `want_input`.
    pub fn backward<F: Real>(
        &self,
        p: &[F],
        grad: &mut [F],
        cache: &ConvCache<F>,
        dout: &[F],
        want_input: bool,
    ) -> Option<Vec<F>> {
        let (height, width) = (cache.height, cache.width);
        let (ho, wo) = self.out_dims(height, width);
        let n = ho * wo;
        let kk = self.cin * self.kernel * self.kernel;
        for co in 0..self.cout {
            let s: F = dout[co * n..(co + 1) * n].iter().copied().sum();
            grad[self.bias + co] = grad[self.bias + co] + s;
        }
        let weight = &p[self.weight..self.weight + self.weight_len()];
        let mut dx = want_input.then(|| vec![F::zero(); self.cin * height * width]);
        let step = self.tile_rows(ho, wo);
        let mut cols = Vec::new();
        let mut dcols = Vec::new();
        for r0 in (0..ho).step_by(step) {
            let rows = r0..(r0 + step).min(ho);
            let nt = rows.len() * wo;
            let dtile = &dout[r0 * wo..];
            let (b, ldb): (&[F], usize) = if self.pointwise() {
                (&cache.input[r0 * wo..], n)
            } else {
                self.im2col(&cache.input, height, width, rows.clone(), &mut cols);
                (&cols, nt)
            };
            // dW += dout_tile * cols_tile^T
            F::gemm_strided(
                self.cout,
                nt,
                kk,
                F::one(),
                dtile,
                (n, 1),
                b,
                (1, ldb),
                F::one(),
                &mut grad[self.weight..self.weight + self.weight_len()],
                kk,
            );
            if let Some(dx) = dx.as_mut() {
                if self.pointwise() {
                    F::gemm_strided(kk, self.cout, nt, F::one(), weight, (1, kk), dtile, (n, 1), F::one(), &mut dx[r0 * wo..], n);
                } else {
                    dcols.clear();
                    dcols.resize(kk * nt, F::zero());
                    F::gemm_strided(kk, self.cout, nt, F::one(), weight, (1, kk), dtile, (n, 1), F::zero(), &mut dcols, nt);
                    self.col2im_add(&dcols, height, width, rows, dx);
                }
            }
        }
        dx
    }
}

/// Offsets of a fully connected layer `y = W x + b`, `W` is `nout x nin`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Dense {
    pub weight: usize,
    pub bias: usize,
    pub nin: usize,
    pub nout: usize,
}

impl Dense {
    pub fn forward<F: Real>(&self, p: &[F], x: &[F]) -> Vec<F> {
        (0..self.nout)
            .map(|o| {
                let row = &p[self.weight + o * self.nin..self.weight + (o + 1) * self.nin];
                row.iter().zip(x).fold(p[self.bias + o], |acc, (&w, &v)| acc + w * v)
            })
            .collect()
    }

    pub fn backward<F: Real>(&self, p: &[F], grad: &mut [F], x: &[F], dy: &[F]) -> Vec<F> {
        let mut dx = vec![F::zero(); self.nin];
        for o in 0..self.nout {
            let g = dy[o];
            grad[self.bias + o] = grad[self.bias + o] + g;
            let base = self.weight + o * self.nin;
            for i in 0..self.nin {
                grad[base + i] = grad[base + i] + g * x[i];
                dx[i] = dx[i] + g * p[base + i];
            }
        }
        dx
    }
}

/// Nearest-neighbour 2x upsampling of `c` planes.
pub(crate) fn upsample2<F: Real>(x: &[F], channels: usize, height: usize, width: usize) -> Vec<F> {
    let (h2, w2) = (2 * height, 2 * width);
    let mut out = vec![F::zero(); channels * h2 * w2];
    for c in 0..channels {
        for y in 0..h2 {
            let src = &x[(c * height + y / 2) * width..(c * height + y / 2 + 1) * width];
            let dst = &mut out[(c * h2 + y) * w2..(c * h2 + y + 1) * w2];
            for (xo, d) in dst.iter_mut().enumerate() {
                *d = src[xo / 2];
            }
        }
    }
    out
}

/// Adjoint of [`upsample2`]: sums each 2x2 block.
pub(crate) fn upsample2_backward<F: Real>(dy: &[F], channels: usize, height: usize, width: usize) -> Vec<F> {
    let w2 = 2 * width;
    let mut dx = vec![F::zero(); channels * height * width];
    for c in 0..channels {
        for y in 0..2 * height {
            let src = &dy[(c * 2 * height + y) * w2..(c * 2 * height + y + 1) * w2];
            let dst = &mut dx[(c * height + y / 2) * width..(c * height + y / 2 + 1) * width];
            for (xo, &v) in src.iter().enumerate() {
                dst[xo / 2] = dst[xo / 2] + v;
            }
        }
    }
    dx
}

/// Per-channel spatial mean.
pub(crate) fn global_avg_pool<F: Real>(x: &[F], channels: usize, plane: usize) -> Vec<F> {
    let inv = F::of(1.0 / plane as f64);
    (0..channels)
        .map(|c| x[c * plane..(c + 1) * plane].iter().copied().sum::<F>() * inv)
        .collect()
}
