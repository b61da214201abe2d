#![no_main]

use libfuzzer_sys::fuzz_target;
use stemdeg::io::{decode_atdf, encode_atdf};

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = decode_atdf(data) {
        // Anything that decodes must re-encode to the same bytes.
        assert_eq!(encode_atdf(&t), data);
        let _ = t.to_image();
        let _ = t.to_decay();
    }
});
