use super::*;
use crate::synth::{gen_atom_map, AtomMapSpec, NoiseConfig, SpecSampler};

fn mini() -> ModelConfig {
    ModelConfig {
        base_channels: 2,
        depth: 2,
        time_embed_dim: 4,
        theta_max_deg: 10.0,
        shift_max_px: 2.0,
        input_size: [8, 8],
    }
}

fn small() -> ModelConfig {
    ModelConfig {
        base_channels: 4,
        input_size: [32, 32],
        ..ModelConfig::default()
    }
}

fn source(size: [usize; 2], seed: u64) -> SyntheticSource {
    SyntheticSource {
        atoms: AtomMapSpec::default(),
        sampler: SpecSampler {
            theta_max_deg: 3.0,
            shift_max_px: 2.0,
            ..SpecSampler::default()
        },
        size,
        seed,
    }
}

/// Every parameter randomized so no gradient path is trivially zero.
fn randomized(cfg: &ModelConfig, seed: u64) -> Vec<f64> {
    let mut rng = crate::rng::rng_from_seed(seed);
    let p = ModelParams::init(cfg, seed).unwrap();
    p.values.iter().map(|_| 0.5 * (2.0 * rng.random::<f64>() - 1.0)).collect()
}

fn mini_item(seed: u64) -> TrainItem {
    let s = source([8, 8], seed);
    // 8x8 is below the atom generator's minimum; crop a larger map instead.
    let big = gen_atom_map(&AtomMapSpec { seed, ..AtomMapSpec::default() }, 32, 32).unwrap();
    let x0 = big.crop(11, 9, 8, 8).unwrap();
    let spec = s.sampler.sample(8, 8, seed).unwrap();
    let sample = crate::synth::gen_sequence_sample(&x0, &spec, 4, seed).unwrap();
    TrainItem::from_sample(&sample)
}

#[test]
fn zero_initialized_heads_give_half_decay_and_identity_drift() {
    let cfg = small();
    let params = ModelParams::init(&cfg, 1).unwrap();
    let img = gen_atom_map(&AtomMapSpec::default(), 32, 32).unwrap();
    let (lam, aff) = forward(&params, &img, &img, 3.0, 10.0).unwrap();
    assert_eq!(lam.dims(), (32, 32));
    assert!(lam.as_slice().iter().all(|&v| v == 0.5));
    assert_eq!(aff, AffineParams::IDENTITY);
}

#[test]
fn output_ranges_hold_for_extreme_parameters() {
    let cfg = small();
    let mut params = ModelParams::init(&cfg, 2).unwrap();
    let mut rng = crate::rng::rng_from_seed(5);
    for v in &mut params.values {
        *v = (50.0 * (2.0 * rng.random::<f64>() - 1.0)) as f32;
    }
    let a = gen_atom_map(&AtomMapSpec::default(), 32, 32).unwrap();
    let b = a.scaled(3.0).unwrap();
    for t in [0.0, 5.0, 10.0] {
        let (lam, aff) = forward(&params, &a, &b, t, 10.0).unwrap();
        assert!(lam.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(aff.theta_deg.abs() < cfg.theta_max_deg);
        assert!(aff.tx_px.abs() < cfg.shift_max_px && aff.ty_px.abs() < cfg.shift_max_px);
    }
}

#[test]
fn shape_mismatch_is_an_error() {
    let params = ModelParams::init(&small(), 0).unwrap();
    let a = ImageGrid::zeros(32, 32);
    let b = ImageGrid::zeros(32, 40);
    assert!(matches!(forward(&params, &a, &b, 1.0, 2.0), Err(Error::Dimension { .. })));
    assert!(ModelConfig { input_size: [30, 32], ..small() }.validate().is_err());
}

#[test]
fn time_features_are_deterministic_and_finite() {
    let net = Network::new(&ModelConfig::default()).unwrap();
    let a = net.time_features(3.0, 10.0);
    assert_eq!(a, net.time_features(3.0, 10.0));
    assert_eq!(a.len(), 32);
    assert!(a.iter().all(|v| v.is_finite()));
    assert_ne!(a, net.time_features(4.0, 10.0));
}

#[test]
fn full_pipeline_gradient_matches_finite_differences() {
    let cfg = mini();
    let net = Network::new(&cfg).unwrap();
    let p = randomized(&cfg, 11);
    let item = mini_item(3);
    let mut grad = vec![0.0; p.len()];
    net.loss_and_grad(&p, &item, Some((&mut grad, 1.0))).unwrap();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let mut q = p.clone();
        q[i] = p[i] + h;
        let up = net.loss_and_grad(&q, &item, None).unwrap();
        q[i] = p[i] - h;
        let down = net.loss_and_grad(&q, &item, None).unwrap();
        let fd = (up - down) / (2.0 * h);
        let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-7);
        worst = worst.max(rel);
    }
    assert!(worst < 1e-3, "worst relative error {worst}");
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let cfg = TrainConfig {
        batch_size: 2,
        steps: 3,
        learning_rate: 0.0,
        validation_size: 2,
        validation_every: 1,
        ..TrainConfig::default()
    };
    let src = source([32, 32], 4);
    let out = train(&cfg, &small(), &src).unwrap();
    assert_eq!(out.params, ModelParams::init(&small(), cfg.seed).unwrap());
    let vals: Vec<f64> = out.history.iter().filter_map(|r| r.val_loss).collect();
    assert_eq!(vals.len(), 3);
    assert!(vals.iter().all(|&v| v == vals[0]));
    for r in &out.history {
        let batch = training_batch(&src, &cfg, r.step).unwrap();
        assert_eq!(r.loss, validation_loss(&out.params, &batch).unwrap());
    }
}

#[test]
fn training_is_reproducible() {
    let cfg = TrainConfig {
        batch_size: 2,
        steps: 4,
        learning_rate: 1e-3,
        validation_size: 2,
        validation_every: 2,
        ..TrainConfig::default()
    };
    let src = source([32, 32], 8);
    let a = train(&cfg, &small(), &src).unwrap();
    let b = train(&cfg, &small(), &src).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.params, b.params);
}

#[test]
fn tiny_step_decreases_batch_loss() {
    let cfg = TrainConfig {
        batch_size: 4,
        steps: 1,
        learning_rate: 1e-6,
        cosine: false,
        validation_size: 0,
        ..TrainConfig::default()
    };
    let src = source([32, 32], 21);
    let out = train(&cfg, &small(), &src).unwrap();
    let before = ModelParams::init(&small(), cfg.seed).unwrap();
    let batch = training_batch(&src, &cfg, 0).unwrap();
    let net = before.network().unwrap();
    let eval = |p: &ModelParams| {
        let v: Vec<f64> = p.values.iter().map(|&x| x as f64).collect();
        batch.iter().map(|it| net.loss_and_grad(&v, it, None).unwrap()).sum::<f64>()
    };
    assert!(eval(&out.params) < eval(&before));
}

#[test]
fn predict_wraps_forward() {
    let params = ModelParams::init(&small(), 0).unwrap();
    let s = source([32, 32], 1).sample(0).unwrap();
    let est = predict(&params, &s.x0_noisy, &s.xt_noisy_final, 10.0, 10.0).unwrap();
    assert!(est.converged && est.iterations == 1 && est.residual > 0.0);
    let mid = predict(&params, &s.x0_noisy, &s.xt_noisy_final, 5.0, 10.0).unwrap();
    assert_eq!(mid.residual, 0.0);
    let le = LearnedEstimator::new(params).unwrap();
    assert!(le.time_conditioned());
    assert_eq!(le.estimate(&s.x0_noisy, &s.xt_noisy_final, 10.0, 10).unwrap(), est);
}

#[test]
fn synthetic_source_is_index_addressed() {
    let src = source([32, 32], 2);
    assert_eq!(src.sample(5).unwrap(), src.sample(5).unwrap());
    assert_ne!(src.sample(5).unwrap().x0_clean, src.sample(6).unwrap().x0_clean);
    let s = src.sample(9).unwrap();
    assert!((1..=s.total_steps).contains(&s.t));
    let _ = NoiseConfig::default();
}
