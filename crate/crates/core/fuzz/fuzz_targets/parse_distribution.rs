#![no_main]

use anytime_pac::divergences::{kl_divergence, Distribution};
use anytime_pac::parse::parse_distribution;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Anything accepted must be a valid distribution against itself.
    if let Ok(d) = parse_distribution(text) {
        if let Distribution::Finite(_) = &d {
            assert_eq!(kl_divergence(&d, &d).unwrap(), 0.0);
        }
    }
});
