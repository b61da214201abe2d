use proptest::prelude::*;

use stemdeg::direct::{decay_from_pair, DirectConfig};
use stemdeg::image::{build_affine_matrix, warp, AffineMatrix, AffineParams, ImageGrid};
use stemdeg::learned::{forward, ModelConfig, ModelParams};
use stemdeg::synth::{add_noise, gen_atom_map, perlin_field, AtomMapSpec, NoiseConfig};

fn atoms(size: usize, seed: u64) -> ImageGrid {
    gen_atom_map(&AtomMapSpec { seed, ..AtomMapSpec::default() }, size, size).unwrap()
}

fn pixels(h: usize, w: usize, values: &[f64]) -> ImageGrid {
    ImageGrid::new(h, w, values.iter().cycle().take(h * w).copied().collect()).unwrap()
}

/// Mean absolute difference over the central `inner × inner` window.
fn central_mae(a: &ImageGrid, b: &ImageGrid, inner: usize) -> f64 {
    let (h, w) = a.dims();
    let (r0, c0) = ((h - inner) / 2, (w - inner) / 2);
    let mut sum = 0.0;
    for r in r0..r0 + inner {
        for c in c0..c0 + inner {
            sum += (a.get(r, c) - b.get(r, c)).abs();
        }
    }
    sum / (inner * inner) as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn integer_translation_round_trip_is_exact(tx in -8i32..=8, ty in -8i32..=8, seed in 0u64..100) {
        let x = atoms(48, seed);
        let m = AffineMatrix::translation(tx as f64, ty as f64);
        let back = warp(&warp(&x, &m, 0.0).unwrap(), &m.inverse().unwrap(), 0.0).unwrap();
        let inner = 48 - 2 * 8;
        prop_assert_eq!(central_mae(&x, &back, inner), 0.0);
    }

    #[test]
    fn rigid_round_trip_blurs_only_slightly(theta in -20.0f64..20.0, tx in -6.0f64..6.0, ty in -6.0f64..6.0, seed in 0u64..100) {
        let x = atoms(64, seed);
        let m = build_affine_matrix(&AffineParams::new(theta, tx, ty)).unwrap();
        let back = warp(&warp(&x, &m, 0.0).unwrap(), &m.inverse().unwrap(), 0.0).unwrap();
        prop_assert!(central_mae(&x, &back, 24) < 0.02);
    }

    #[test]
    fn generators_are_pure_functions_of_the_seed(seed in any::<u64>()) {
        prop_assert_eq!(atoms(32, seed), atoms(32, seed));
        prop_assert_eq!(perlin_field(20, 24, 3, 2, seed).unwrap(), perlin_field(20, 24, 3, 2, seed).unwrap());
        let x = atoms(32, 1);
        let noise = NoiseConfig::default();
        prop_assert_eq!(add_noise(&x, &noise, seed).unwrap(), add_noise(&x, &noise, seed).unwrap());
    }

    #[test]
    fn disabled_noise_is_identity(h in 1usize..12, w in 1usize..12, vals in proptest::collection::vec(0.0f64..4.0, 1..30), seed in any::<u64>()) {
        let x = pixels(h, w, &vals);
        prop_assert_eq!(add_noise(&x, &NoiseConfig::disabled(), seed).unwrap(), x);
    }

    #[test]
    fn noise_strings_round_trip(dose in 1.0f64..1e4, jitter in 0.0f64..2.0, readout in 0.0f64..0.1, mask in 0u8..8) {
        let mut cfg = NoiseConfig { dose, jitter_sigma: jitter, readout_sigma: readout, ..NoiseConfig::default() };
        cfg.poisson_enabled = mask & 1 != 0;
        cfg.jitter_enabled = mask & 2 != 0;
        cfg.readout_enabled = mask & 4 != 0;
        let text = cfg.to_string();
        let back: NoiseConfig = text.parse().unwrap();
        prop_assert_eq!(back.to_string(), text);
    }

    #[test]
    fn recovered_decay_stays_in_unit_range(
        vals0 in proptest::collection::vec(0.0f64..2.0, 1..50),
        valst in proptest::collection::vec(0.0f64..2.0, 1..50),
        theta in -30.0f64..30.0, tx in -10.0f64..10.0, ty in -10.0f64..10.0,
        smooth in any::<bool>(),
    ) {
        let (x0, xt) = (pixels(17, 13, &vals0), pixels(17, 13, &valst));
        let cfg = DirectConfig { smooth_decay: smooth, ..DirectConfig::default() };
        let (lam, valid) = decay_from_pair(&x0, &xt, &AffineParams::new(theta, tx, ty), &cfg).unwrap();
        prop_assert!(lam.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!((0.0..=1.0).contains(&valid));
    }

    #[test]
    fn network_outputs_stay_in_range(
        scale in 0.0f64..40.0,
        seed in any::<u64>(),
        vals in proptest::collection::vec(-5.0f64..5.0, 1..40),
        t in 0.0f64..=10.0,
    ) {
        let cfg = ModelConfig { base_channels: 2, depth: 1, time_embed_dim: 4, input_size: [16, 16], ..ModelConfig::default() };
        let mut params = ModelParams::init(&cfg, seed).unwrap();
        for (i, v) in params.values.iter_mut().enumerate() {
            *v += (scale * vals[i % vals.len()]) as f32;
        }
        let magnitudes: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
        let a = pixels(16, 16, &magnitudes);
        let b = pixels(16, 16, &magnitudes.iter().rev().map(|v| v * 3.0).collect::<Vec<_>>());
        let (lam, aff) = forward(&params, &a, &b, t, 10.0).unwrap();
        prop_assert!(lam.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(aff.theta_deg.abs() <= cfg.theta_max_deg);
        prop_assert!(aff.tx_px.abs() <= cfg.shift_max_px && aff.ty_px.abs() <= cfg.shift_max_px);
    }
}
