//! File formats: lossless float tensors, 16-bit PGM, model checkpoints,
//! estimate records and CSV number formatting.

mod atdf;
mod model;
mod pgm;

pub use atdf::{decode_atdf, encode_atdf, FrameTensor};
pub use model::{decode_model, encode_model};
pub use pgm::{decode_pgm, encode_pgm};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::Estimate;
use crate::image::{AffineParams, ImageGrid};
use crate::learned::{ModelConfig, TrainConfig};
use crate::synth::{AtomMapSpec, SpecSampler};

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    Ok(std::fs::read(path)?)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    Ok(std::fs::write(path, bytes)?)
}

/// Loads an image from `.pgm` or ATDF (any other extension).
pub fn load_image(path: &Path) -> Result<ImageGrid> {
    let bytes = read_bytes(path)?;
    if has_extension(path, "pgm") {
        decode_pgm(&bytes)
    } else {
        decode_atdf(&bytes)?.to_image()
    }
}

/// Saves an image as `.pgm` or ATDF (any other extension).
pub fn save_image(path: &Path, img: &ImageGrid) -> Result<()> {
    if has_extension(path, "pgm") {
        write_bytes(path, &encode_pgm(img))
    } else {
        write_bytes(path, &encode_atdf(&FrameTensor::from_image(img)))
    }
}

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// JSON record of one estimate; the decay map lives in a separate tensor
/// file named by `decay_path`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateFile {
    pub theta_deg: f64,
    pub tx_px: f64,
    pub ty_px: f64,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub valid_fraction: f64,
    pub decay_path: String,
}

impl EstimateFile {
    pub fn new(est: &Estimate, decay_path: impl Into<String>) -> Self {
        Self {
            theta_deg: est.affine.theta_deg,
            tx_px: est.affine.tx_px,
            ty_px: est.affine.ty_px,
            residual: est.residual,
            converged: est.converged,
            iterations: est.iterations,
            valid_fraction: est.valid_fraction,
            decay_path: decay_path.into(),
        }
    }

    pub fn affine(&self) -> AffineParams {
        AffineParams::new(self.theta_deg, self.tx_px, self.ty_px)
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let est: Self = serde_json::from_str(text).map_err(|e| json_error(text, &e))?;
        est.validate()?;
        Ok(est)
    }

    fn validate(&self) -> Result<()> {
        let nums = [self.theta_deg, self.tx_px, self.ty_px, self.residual, self.valid_fraction];
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(0, "estimate has non-finite fields"));
        }
        if !(0.0..=1.0).contains(&self.valid_fraction) {
            return Err(Error::format(0, "valid_fraction outside [0, 1]"));
        }
        Ok(())
    }
}

/// Converts a serde_json error into a format error at its byte offset.
pub fn json_error(text: &str, e: &serde_json::Error) -> Error {
    let offset: usize = text
        .split_inclusive('\n')
        .take(e.line().saturating_sub(1))
        .map(str::len)
        .sum::<usize>()
        + e.column().saturating_sub(1);
    Error::format(offset.min(text.len()) as u64, e.to_string())
}

/// Training run description read by the `train` command.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFile {
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub sampler: SpecSampler,
    /// Atom-map template; the lattice is re-oriented and re-seeded per sample.
    pub atoms: AtomMapSpec,
    /// Image files to crop training samples from instead of synthetic maps.
    pub maps: Vec<String>,
}

impl TrainFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(text).map_err(|e| json_error(text, &e))?;
        f.train.validate()?;
        f.model.validate()?;
        f.atoms.validate()?;
        f.sampler.noise.validate()?;
        Ok(f)
    }
}

/// Six significant digits, shortest form; parses back with `str::parse`.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn estimate_json_has_exact_keys() {
        let f = EstimateFile {
            theta_deg: 1.5,
            tx_px: -2.0,
            ty_px: 0.25,
            residual: 1e-4,
            converged: true,
            iterations: 7,
            valid_fraction: 0.9,
            decay_path: "decay.atdf".into(),
        };
        let json = f.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(
            keys,
            ["converged", "decay_path", "iterations", "residual", "theta_deg", "tx_px", "ty_px", "valid_fraction"]
        );
        assert_eq!(EstimateFile::from_json(&json).unwrap(), f);
        let extra = json.replacen('{', "{\"extra\": 1,", 1);
        assert!(EstimateFile::from_json(&extra).is_err());
    }

    #[test]
    fn json_errors_point_into_the_text() {
        let text = "{\n  \"theta_deg\": x\n}";
        match EstimateFile::from_json(text) {
            Err(Error::Format { offset, .. }) => assert_eq!(&text[offset as usize..offset as usize + 1], "x"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn train_file_defaults_and_rejects_unknown_keys() {
        let f = TrainFile::from_json("{\"train\": {\"steps\": 5}}").unwrap();
        assert_eq!(f.train.steps, 5);
        assert_eq!(f.model, ModelConfig::default());
        assert!(TrainFile::from_json("{\"trian\": {}}").is_err());
        assert!(TrainFile::from_json("{\"train\": {\"batch_size\": 0}}").is_err());
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig6(0.0), "0");
        assert_eq!(fmt_sig6(1.0), "1");
        assert_eq!(fmt_sig6(0.123456789), "0.123457");
        assert_eq!(fmt_sig6(2.4271), "2.4271");
        assert_eq!(fmt_sig6(-1234567.0), "-1.23457e6");
        assert_eq!(fmt_sig6(9.9999996), "10");
        assert_eq!(fmt_sig6(1.5e-7), "1.5e-7");
        assert_eq!(fmt_sig6(0.00012), "0.00012");
    }

    proptest! {
        #[test]
        fn sig6_parses_back_to_six_digits(x in -1e9f64..1e9, scale in -12i32..12) {
            let v = x * 10f64.powi(scale);
            let back: f64 = fmt_sig6(v).parse().unwrap();
            prop_assert!((back - v).abs() <= 5e-6 * v.abs() * (1.0 + 1e-12));
        }
    }
}
