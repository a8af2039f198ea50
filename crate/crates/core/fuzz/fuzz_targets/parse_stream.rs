#![no_main]

use anytime_pac::parse::parse_stream;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(losses) = parse_stream(data) {
        assert!(losses.iter().all(|f| f.is_finite()));
    }
});
