#![no_main]

use anytime_pac::simulation::{Experiment, ExperimentConfig};
use libfuzzer_sys::fuzz_target;

// Validation precomputes oracle tables whose cost grows with the horizon.
const MAX_HORIZON: u64 = 256;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = ExperimentConfig::from_toml(text) else {
        return;
    };
    if config.horizon > MAX_HORIZON {
        return;
    }
    if let Ok(exp) = Experiment::new(config) {
        let _ = exp.run(0);
    }
});
