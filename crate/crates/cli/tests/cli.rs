use std::path::Path;
use std::process::{Command, Output};

fn stemdeg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stemdeg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stemdeg_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stemdeg"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn field(json: &serde_json::Value, key: &str) -> f64 {
    json[key].as_f64().unwrap_or_else(|| panic!("missing {key}"))
}

fn simulate_into(dir: &Path) {
    let x0 = dir.join("atoms.atdf");
    ok(stemdeg(&["gen-atoms", "--out", path(&x0), "--size", "96", "--seed", "3"]));
    let seq = dir.join("seq");
    ok(stemdeg(&[
        "simulate", "--in", path(&x0), "--theta", "2", "--tx", "4", "--ty", "-3", "--steps", "10",
        "--decay-cells", "3", "--min-survival", "0.5", "--noise", "none", "--seed", "1", "--out-dir", path(&seq),
    ]));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = stemdeg(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert!(out.stdout.is_empty());
}

#[test]
fn help_exits_zero() {
    assert_eq!(stemdeg(&["--help"]).status.code(), Some(0));
}

#[test]
fn midway_estimate_recovers_half_the_drift() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path());
    let seq = dir.path().join("seq");
    for name in ["x0.atdf", "xT.atdf", "x_05.atdf", "lambda_10.atdf", "spec.json", "manifest.json"] {
        assert!(seq.join(name).exists(), "{name} missing");
    }
    let est = dir.path().join("est.json");
    ok(stemdeg(&[
        "estimate", "--ref", path(&seq.join("x0.atdf")), "--target", path(&seq.join("x_05.atdf")),
        "--method", "direct", "--out", path(&est),
    ]));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&est).unwrap()).unwrap();
    assert!((field(&json, "theta_deg") - 1.0).abs() < 0.1, "{json}");
    assert!((field(&json, "tx_px") - 2.0).abs() < 0.1, "{json}");
    assert!((field(&json, "ty_px") + 1.5).abs() < 0.1, "{json}");
    let decay = dir.path().join(json["decay_path"].as_str().unwrap());
    assert!(decay.exists());

    let flow = dir.path().join("flow.atdf");
    ok(stemdeg(&["flow", "--est", path(&est), "--size", "96", "--stride", "8", "--out", path(&flow)]));
    assert!(std::fs::read(&flow).unwrap().starts_with(b"ATDF1\n12 12 2\n"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        ok(stemdeg_in(dir, &["gen-atoms", "--out", "atoms.atdf", "--size", "64", "--seed", "5"]));
        ok(stemdeg_in(dir, &[
            "simulate", "--in", "atoms.atdf", "--theta", "1", "--tx", "2", "--ty", "1", "--steps", "4",
            "--noise", "default", "--seed", "9", "--out-dir", "seq",
        ]));
        ok(stemdeg_in(dir, &[
            "infer", "--ref", "seq/x0.atdf", "--target", "seq/xT.atdf", "--n", "3", "--method", "direct",
            "--out-dir", "infer",
        ]));
    }
    for rel in [
        "atoms.atdf", "atoms.manifest.json", "seq/x_2.atdf", "seq/xT.atdf", "seq/lambda_4.atdf",
        "seq/spec.json", "seq/manifest.json", "infer/frame_2.atdf", "infer/frames.json", "infer/overlay.atdf", "infer/manifest.json",
    ] {
        let (x, y) = (std::fs::read(a.path().join(rel)).unwrap(), std::fs::read(b.path().join(rel)).unwrap());
        assert!(x == y, "{rel} differs between runs");
    }
}

#[test]
fn malformed_input_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.atdf");
    std::fs::write(&bad, b"ATDF1\n4 4 1\n\x00\x00").unwrap();
    let out = stemdeg(&["estimate", "--ref", path(&bad), "--target", path(&bad), "--out", path(&dir.path().join("e.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("byte"));
    let missing = stemdeg(&["flow", "--est", path(&dir.path().join("none.json")), "--size", "8", "--out", path(&bad)]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn bad_values_are_usage_errors() {
    let out = stemdeg(&["gen-atoms", "--out", "x.atdf", "--size", "ten"]);
    assert_eq!(out.status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let x0 = dir.path().join("a.pgm");
    ok(stemdeg(&["gen-atoms", "--out", path(&x0), "--size", "32"]));
    let out = stemdeg(&["simulate", "--in", path(&x0), "--theta", "200", "--out-dir", path(&dir.path().join("s"))]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let out = stemdeg(&["estimate", "--ref", path(&x0), "--target", path(&x0), "--method", "model", "--out", "e.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn benchmarks_write_csv_with_expected_headers() {
    let dir = tempfile::tempdir().unwrap();
    let damage = dir.path().join("damage.csv");
    ok(stemdeg(&[
        "bench-damage", "--noise-type", "perlin", "--trials", "1", "--frames", "4", "--image-size", "64",
        "--out", path(&damage),
    ]));
    let text = std::fs::read_to_string(&damage).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("noise_type,mae,mse,rmse,r2,var"));
    assert!(lines.next().unwrap().starts_with("perlin,"));

    let drift = dir.path().join("drift.csv");
    ok(stemdeg(&["bench-drift", "--rot", "2", "--drift", "3", "--crop", "64", "--trials", "2", "--out", path(&drift)]));
    let text = std::fs::read_to_string(&drift).unwrap();
    assert!(text.starts_with("rot_set_deg,drift_set_px,mean_drift_err_px,mean_rot_err_deg\n2,3,"));
}

#[test]
fn tiny_training_run_writes_a_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("train.json");
    std::fs::write(
        &cfg,
        r#"{"train": {"steps": 3, "batch_size": 2, "validation_size": 2, "validation_every": 1, "seed": 4},
            "model": {"base_channels": 2, "depth": 1, "time_embed_dim": 4, "input_size": [32, 32]}}"#,
    )
    .unwrap();
    let model = dir.path().join("m.atdm");
    let hist = dir.path().join("h.csv");
    ok(stemdeg(&["train", "--config", path(&cfg), "--out", path(&model), "--history", path(&hist)]));
    let history = std::fs::read_to_string(&hist).unwrap();
    assert_eq!(history.lines().next(), Some("step,lr,loss,val_loss"));
    assert_eq!(history.lines().count(), 4);

    let img = dir.path().join("a.atdf");
    ok(stemdeg(&["gen-atoms", "--out", path(&img), "--size", "32"]));
    let est = dir.path().join("e.json");
    let out = stemdeg(&[
        "estimate", "--ref", path(&img), "--target", path(&img), "--method", "model", "--model", path(&model),
        "--out", path(&est),
    ]);
    assert!(matches!(out.status.code(), Some(0 | 3)), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(est.exists());
}

#[test]
fn replaying_a_manifest_reproduces_the_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(stemdeg_in(d, &["gen-atoms", "--out", "a.atdf", "--size", "48", "--seed", "2", "--jitter", "0.2"]));
    ok(stemdeg_in(d, &[
        "simulate", "--in", "a.atdf", "--theta", "1", "--tx", "2", "--steps", "3", "--noise", "dose=100,readout=0.02",
        "--seed", "6", "--out-dir", "seq",
    ]));
    ok(stemdeg_in(d, &["estimate", "--ref", "seq/x0.atdf", "--target", "seq/xT.atdf", "--out", "est.json"]));
    let originals: Vec<(&str, Vec<u8>)> = ["a.atdf", "seq/x_2.atdf", "seq/manifest.json", "est.json", "est.decay.atdf"]
        .into_iter()
        .map(|rel| (rel, std::fs::read(d.join(rel)).unwrap()))
        .collect();
    std::fs::copy(d.join("seq/manifest.json"), d.join("simulate.json")).unwrap();
    std::fs::remove_file(d.join("a.atdf")).unwrap();
    std::fs::remove_dir_all(d.join("seq")).unwrap();
    std::fs::remove_file(d.join("est.json")).unwrap();
    for manifest in ["a.manifest.json", "simulate.json", "est.manifest.json"] {
        ok(stemdeg_in(d, &["replay", "--manifest", manifest]));
    }
    for (rel, bytes) in originals {
        assert!(std::fs::read(d.join(rel)).unwrap() == bytes, "{rel} differs after replay");
    }
}

#[test]
fn replay_rejects_foreign_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    std::fs::write(&m, r#"{"tool": "other", "command": "flow", "params": {}}"#).unwrap();
    assert_eq!(stemdeg(&["replay", "--manifest", path(&m)]).status.code(), Some(1));
    std::fs::write(&m, r#"{"tool": "stemdeg", "command": "flow", "params": {"est": 3}}"#).unwrap();
    assert_eq!(stemdeg(&["replay", "--manifest", path(&m)]).status.code(), Some(2));
}
