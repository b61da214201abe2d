//! Replays the checked-in fuzz seeds through the same entry points as the
//! fuzz targets, so the decoders are exercised on every `cargo test`.

use std::path::PathBuf;

use stemdeg::io::{decode_atdf, decode_model, decode_pgm, encode_atdf, EstimateFile, TrainFile};
use stemdeg::synth::NoiseConfig;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).expect("text seed")
}

#[test]
fn atdf_seeds() {
    for (name, bytes) in seeds("atdf_read") {
        match decode_atdf(&bytes) {
            Ok(t) => {
                assert_eq!(encode_atdf(&t), bytes, "{name}");
                let image = t.to_image();
                assert_eq!(image.is_ok(), name.starts_with("atoms"), "{name}");
            }
            Err(_) => assert_eq!(name, "truncated.atdf"),
        }
    }
}

#[test]
fn pgm_seeds() {
    for (name, bytes) in seeds("pgm_read") {
        let img = decode_pgm(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(img.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn model_seeds() {
    for (name, bytes) in seeds("atdm_read") {
        assert_eq!(decode_model(&bytes).is_ok(), name == "tiny.atdm", "{name}");
    }
}

#[test]
fn estimate_seeds() {
    for (name, bytes) in seeds("estimate_json") {
        let parsed = EstimateFile::from_json(text(&bytes));
        assert_eq!(parsed.is_ok(), name == "estimate.json", "{name}");
    }
}

#[test]
fn noise_seeds() {
    for (name, bytes) in seeds("noise_arg") {
        let parsed = text(&bytes).parse::<NoiseConfig>();
        assert_eq!(parsed.is_ok(), name != "negative_dose", "{name}");
    }
}

#[test]
fn train_config_seeds() {
    for (name, bytes) in seeds("train_config") {
        let parsed = TrainFile::from_json(text(&bytes));
        assert_eq!(parsed.is_ok(), name != "invalid_batch.json", "{name}");
    }
}
