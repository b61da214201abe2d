#![no_main]

use libfuzzer_sys::fuzz_target;
use stemdeg::io::EstimateFile;

fuzz_target!(|s: &str| {
    if let Ok(est) = EstimateFile::from_json(s) {
        let _ = est.to_json();
    }
});
