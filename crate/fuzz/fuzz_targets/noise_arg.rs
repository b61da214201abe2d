#![no_main]

use libfuzzer_sys::fuzz_target;
use stemdeg::synth::NoiseConfig;

fuzz_target!(|s: &str| {
    let _ = s.parse::<NoiseConfig>();
});
