use crate::error::{Error, Result};
use crate::real::Real;

use super::layers::{
    global_avg_pool, sigmoid, upsample2, upsample2_backward, Conv, ConvCache, Dense, Silu,
};
use super::ModelConfig;

/// Name and shape of one parameter tensor inside the flat vector.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// How a parameter tensor is initialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Init {
    /// Uniform in `±sqrt(3 / fan_in)`.
    FanIn(usize),
    Zero,
}

/// Dual-stream encoder-decoder with time-modulated bottleneck. Holds only
/// the parameter layout; values live in a flat slice.
#[derive(Debug, Clone)]
pub struct Network {
    cfg: ModelConfig,
    encoder: Vec<Conv>,
    fuse: Conv,
    mid: Conv,
    embed: Dense,
    film_scale: Dense,
    film_shift: Dense,
    head_hidden: Dense,
    head_out: Dense,
    decoder: Vec<Conv>,
    out: Conv,
    manifest: Vec<TensorEntry>,
    inits: Vec<Init>,
    len: usize,
}

struct Builder {
    manifest: Vec<TensorEntry>,
    inits: Vec<Init>,
    len: usize,
}

impl Builder {
    fn tensor(&mut self, name: String, shape: Vec<usize>, init: Init) -> usize {
        let offset = self.len;
        self.len += shape.iter().product::<usize>();
        self.manifest.push(TensorEntry { name, shape, offset });
        self.inits.push(init);
        offset
    }

    fn conv(&mut self, name: &str, cin: usize, cout: usize, kernel: usize, stride: usize, zero: bool) -> Conv {
        let fan_in = cin * kernel * kernel;
        let winit = if zero { Init::Zero } else { Init::FanIn(fan_in) };
        let weight = self.tensor(format!("{name}.weight"), vec![cout, cin, kernel, kernel], winit);
        let bias = self.tensor(format!("{name}.bias"), vec![cout], Init::Zero);
        Conv {
            weight,
            bias,
            cin,
            cout,
            kernel,
            stride,
        }
    }

    fn dense(&mut self, name: &str, nin: usize, nout: usize, zero: bool) -> Dense {
        let winit = if zero { Init::Zero } else { Init::FanIn(nin) };
        let weight = self.tensor(format!("{name}.weight"), vec![nout, nin], winit);
        let bias = self.tensor(format!("{name}.bias"), vec![nout], Init::Zero);
        Dense {
            weight,
            bias,
            nin,
            nout,
        }
    }
}

/// Everything the backward pass needs from one forward pass.
pub(crate) struct Trace<F> {
    streams: [StreamTrace<F>; 2],
    fuse: ConvCache<F>,
    fused: Vec<F>,
    film_scale: Vec<F>,
    film_in: Silu<F>,
    mid: ConvCache<F>,
    mid_pre: Silu<F>,
    pooled: Vec<F>,
    head_pre: Silu<F>,
    head_act: Vec<F>,
    head_tanh: [F; 3],
    features: Vec<F>,
    embed_pre: Silu<F>,
    gamma: Vec<F>,
    decoder: Vec<(ConvCache<F>, Silu<F>)>,
    out: ConvCache<F>,
    pub logits: Vec<F>,
    pub lambda: Vec<F>,
    /// Affine head outputs before the tanh squashing.
    pub head_raw: [F; 3],
    /// `(θ°, tx, ty)`.
    pub affine: [F; 3],
}

struct StreamTrace<F> {
    caches: Vec<ConvCache<F>>,
    pre: Vec<Silu<F>>,
    act: Vec<Vec<F>>,
}

impl Network {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.base_channels;
        let d = cfg.depth;
        let ch = |k: usize| c << k;
        let mut b = Builder {
            manifest: Vec::new(),
            inits: Vec::new(),
            len: 0,
        };
        let mut encoder = vec![b.conv("enc0", 1, ch(0), 3, 1, false)];
        for k in 1..=d {
            encoder.push(b.conv(&format!("enc{k}"), ch(k - 1), ch(k), 3, 2, false));
        }
        let fuse = b.conv("fuse", 2 * ch(d), ch(d), 3, 1, false);
        let mid = b.conv("mid", ch(d), ch(d), 3, 1, false);
        let e = cfg.time_embed_dim;
        let embed = b.dense("time_embed", e, e, false);
        let film_scale = b.dense("film_scale", e, ch(d), false);
        let film_shift = b.dense("film_shift", e, ch(d), false);
        let head_hidden = b.dense("affine_hidden", ch(d), ch(d), false);
        let head_out = b.dense("affine_out", ch(d), 3, true);
        let mut decoder = Vec::with_capacity(d);
        for k in (0..d).rev() {
            decoder.push(b.conv(&format!("dec{k}"), ch(k + 1) + 2 * ch(k), ch(k), 3, 1, false));
        }
        let out = b.conv("decay_out", ch(0), 1, 1, 1, true);
        Ok(Self {
            cfg: cfg.clone(),
            encoder,
            fuse,
            mid,
            embed,
            film_scale,
            film_shift,
            head_hidden,
            head_out,
            decoder,
            out,
            manifest: b.manifest,
            inits: b.inits,
            len: b.len,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn manifest(&self) -> &[TensorEntry] {
        &self.manifest
    }

    pub fn param_count(&self) -> usize {
        self.len
    }

    pub(crate) fn inits(&self) -> impl Iterator<Item = (&TensorEntry, Init)> {
        self.manifest.iter().zip(self.inits.iter().copied())
    }

    /// Sinusoidal features of `t / T` at geometrically spaced frequencies.
    pub fn time_features(&self, t: f64, total_steps: f64) -> Vec<f64> {
        let half = self.cfg.time_embed_dim / 2;
        let tau = t / total_steps;
        let mut out = Vec::with_capacity(2 * half);
        for i in 0..half {
            let freq = if half > 1 {
                (1000f64.ln() * i as f64 / (half - 1) as f64).exp()
            } else {
                1.0
            };
            out.push((freq * tau).sin());
        }
        for i in 0..half {
            let freq = if half > 1 {
                (1000f64.ln() * i as f64 / (half - 1) as f64).exp()
            } else {
                1.0
            };
            out.push((freq * tau).cos());
        }
        out
    }

    fn check_inputs<F>(&self, p: &[F], x0: &[F], xt: &[F]) -> Result<()> {
        let [h, w] = self.cfg.input_size;
        if p.len() != self.len {
            return Err(Error::Dimension {
                expected: format!("{} parameters", self.len),
                actual: format!("{}", p.len()),
            });
        }
        for img in [x0, xt] {
            if img.len() != h * w {
                return Err(Error::Dimension {
                    expected: format!("{h}x{w} input"),
                    actual: format!("{} pixels", img.len()),
                });
            }
        }
        Ok(())
    }

    fn encode<F: Real>(&self, p: &[F], x: &[F]) -> StreamTrace<F> {
        let [mut h, mut w] = self.cfg.input_size;
        let mut caches = Vec::with_capacity(self.encoder.len());
        let mut pre = Vec::with_capacity(self.encoder.len());
        let mut act: Vec<Vec<F>> = Vec::with_capacity(self.encoder.len());
        for conv in &self.encoder {
            let input = act.last().map_or(x, |a| a.as_slice());
            let (z, cache) = conv.forward(p, input, h, w);
            (h, w) = conv.out_dims(h, w);
            let (s, a) = Silu::apply(z);
            act.push(a);
            pre.push(s);
            caches.push(cache);
        }
        StreamTrace { caches, pre, act }
    }

    fn level_dims(&self, k: usize) -> (usize, usize) {
        let [h, w] = self.cfg.input_size;
        (h >> k, w >> k)
    }

    /// Forward pass for one sample.
    pub(crate) fn forward<F: Real>(&self, p: &[F], x0: &[F], xt: &[F], t: f64, total_steps: f64) -> Result<Trace<F>> {
        self.check_inputs(p, x0, xt)?;
        if !(total_steps > 0.0) || !(0.0..=total_steps).contains(&t) {
            return Err(Error::OutOfRange {
                what: "time step",
                value: t,
                lo: 0.0,
                hi: total_steps,
            });
        }
        let d = self.cfg.depth;
        let cb = self.cfg.base_channels << d;
        let (hb, wb) = self.level_dims(d);
        let plane = hb * wb;
        let streams = [self.encode(p, x0), self.encode(p, xt)];

        let mut cat = streams[0].act[d].clone();
        cat.extend_from_slice(&streams[1].act[d]);
        let (fused, fuse) = self.fuse.forward(p, &cat, hb, wb);

        let features: Vec<F> = self.time_features(t, total_steps).into_iter().map(F::of).collect();
        let (embed_pre, gamma) = Silu::apply(self.embed.forward(p, &features));
        let film_scale = self.film_scale.forward(p, &gamma);
        let film_shift = self.film_shift.forward(p, &gamma);
        let mut film_in = fused.clone();
        for ch in 0..cb {
            let (s, b) = (F::one() + film_scale[ch], film_shift[ch]);
            for v in &mut film_in[ch * plane..(ch + 1) * plane] {
                *v = s * *v + b;
            }
        }
        let (film_in, modulated) = Silu::apply(film_in);
        let (mid_z, mid) = self.mid.forward(p, &modulated, hb, wb);
        let (mid_pre, bottleneck) = Silu::apply(mid_z);

        let pooled = global_avg_pool(&bottleneck, cb, plane);
        let (head_pre, head_act) = Silu::apply(self.head_hidden.forward(p, &pooled));
        let raw = self.head_out.forward(p, &head_act);
        let head_tanh = [raw[0].tanh(), raw[1].tanh(), raw[2].tanh()];
        let affine = [
            F::of(self.cfg.theta_max_deg) * head_tanh[0],
            F::of(self.cfg.shift_max_px) * head_tanh[1],
            F::of(self.cfg.shift_max_px) * head_tanh[2],
        ];

        let mut x = bottleneck.clone();
        let mut decoder = Vec::with_capacity(d);
        for (i, conv) in self.decoder.iter().enumerate() {
            let k = d - 1 - i;
            let (hk, wk) = self.level_dims(k);
            let mut input = upsample2(&x, self.cfg.base_channels << (k + 1), hk / 2, wk / 2);
            input.extend_from_slice(&streams[0].act[k]);
            input.extend_from_slice(&streams[1].act[k]);
            let (z, cache) = conv.forward(p, &input, hk, wk);
            let (z, a) = Silu::apply(z);
            x = a;
            decoder.push((cache, z));
        }
        let (hk, wk) = self.level_dims(0);
        let (logits, out) = self.out.forward(p, &x, hk, wk);
        let lambda = logits.iter().map(|&z| sigmoid(z)).collect();
        let head_raw = [raw[0], raw[1], raw[2]];

        Ok(Trace {
            streams,
            fuse,
            fused,
            film_scale,
            film_in,
            mid,
            mid_pre,
            pooled,
            head_pre,
            head_act,
            head_tanh,
            features,
            embed_pre,
            gamma,
            decoder,
            out,
            logits,
            lambda,
            head_raw,
            affine,
        })
    }

    /// Accumulates into `grad` the parameter gradient given upstream
    /// gradients for the decay map and for `(θ°, tx, ty)`.
    pub(crate) fn backward<F: Real>(&self, p: &[F], tr: &Trace<F>, dlambda: &[F], daffine: [F; 3], grad: &mut [F]) {
        let d = self.cfg.depth;
        let cb = self.cfg.base_channels << d;
        let (hb, wb) = self.level_dims(d);
        let plane = hb * wb;

        // Decay branch: sigmoid -> 1x1 conv -> decoder levels.
        let dlogits: Vec<F> = tr
            .lambda
            .iter()
            .zip(dlambda)
            .map(|(&l, &g)| g * l * (F::one() - l))
            .collect();
        let mut dx = self
            .out
            .backward(p, grad, &tr.out, &dlogits, true)
            .expect("input gradient requested");
        let mut dskip: [Vec<Vec<F>>; 2] = [
            tr.streams[0].act.iter().map(|a| vec![F::zero(); a.len()]).collect(),
            tr.streams[1].act.iter().map(|a| vec![F::zero(); a.len()]).collect(),
        ];
        for (i, conv) in self.decoder.iter().enumerate().rev() {
            let k = d - 1 - i;
            let (hk, wk) = self.level_dims(k);
            let (cache, z) = &tr.decoder[i];
            let dz = z.backward(&dx);
            let dinput = conv.backward(p, grad, cache, &dz, true).expect("input gradient");
            let cup = self.cfg.base_channels << (k + 1);
            let cs = self.cfg.base_channels << k;
            let up_len = cup * hk * wk;
            let skip_len = cs * hk * wk;
            for (s, buf) in dskip.iter_mut().enumerate() {
                let src = &dinput[up_len + s * skip_len..up_len + (s + 1) * skip_len];
                for (a, &b) in buf[k].iter_mut().zip(src) {
                    *a = *a + b;
                }
            }
            dx = upsample2_backward(&dinput[..up_len], cup, hk / 2, wk / 2);
        }
        let mut dbottleneck = dx;

        // Affine head.
        let scales = [self.cfg.theta_max_deg, self.cfg.shift_max_px, self.cfg.shift_max_px];
        let draw: Vec<F> = (0..3)
            .map(|i| daffine[i] * F::of(scales[i]) * (F::one() - tr.head_tanh[i] * tr.head_tanh[i]))
            .collect();
        let dhead_act = self.head_out.backward(p, grad, &tr.head_act, &draw);
        let dhead_pre = tr.head_pre.backward(&dhead_act);
        let dpooled = self.head_hidden.backward(p, grad, &tr.pooled, &dhead_pre);
        let inv_plane = F::of(1.0 / plane as f64);
        for ch in 0..cb {
            let g = dpooled[ch] * inv_plane;
            for v in &mut dbottleneck[ch * plane..(ch + 1) * plane] {
                *v = *v + g;
            }
        }

        // Bottleneck and time modulation.
        let dmid_pre = tr.mid_pre.backward(&dbottleneck);
        let dmodulated = self
            .mid
            .backward(p, grad, &tr.mid, &dmid_pre, true)
            .expect("input gradient");
        let dfilm_in = tr.film_in.backward(&dmodulated);
        let mut dfused = dfilm_in.clone();
        let mut dscale = vec![F::zero(); cb];
        let mut dshift = vec![F::zero(); cb];
        for ch in 0..cb {
            let s = F::one() + tr.film_scale[ch];
            let range = ch * plane..(ch + 1) * plane;
            for (g, u) in dfused[range.clone()].iter_mut().zip(&tr.fused[range]) {
                dscale[ch] = dscale[ch] + *g * *u;
                dshift[ch] = dshift[ch] + *g;
                *g = *g * s;
            }
        }
        let mut dgamma = self.film_scale.backward(p, grad, &tr.gamma, &dscale);
        for (a, b) in dgamma.iter_mut().zip(self.film_shift.backward(p, grad, &tr.gamma, &dshift)) {
            *a = *a + b;
        }
        let dembed = tr.embed_pre.backward(&dgamma);
        self.embed.backward(p, grad, &tr.features, &dembed);
        let dcat = self
            .fuse
            .backward(p, grad, &tr.fuse, &dfused, true)
            .expect("input gradient");

        // Shared encoder, once per stream.
        let half = dcat.len() / 2;
        for (s, stream) in tr.streams.iter().enumerate() {
            let mut dact = dcat[s * half..(s + 1) * half].to_vec();
            for k in (0..=d).rev() {
                if k < d {
                    for (a, &b) in dact.iter_mut().zip(&dskip[s][k]) {
                        *a = *a + b;
                    }
                }
                let dz = stream.pre[k].backward(&dact);
                let din = self.encoder[k].backward(p, grad, &stream.caches[k], &dz, k > 0);
                if let Some(din) = din {
                    dact = din;
                }
            }
        }
    }
}
