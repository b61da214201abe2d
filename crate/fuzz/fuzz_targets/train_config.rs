#![no_main]

use libfuzzer_sys::fuzz_target;
use stemdeg::io::TrainFile;

fuzz_target!(|s: &str| {
    let _ = TrainFile::from_json(s);
});
