#![no_main]

use anytime_pac::forward::{ForwardBoundState, ForwardKind};
use anytime_pac::parse::parse_observations;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(rows) = parse_observations(data) else {
        return;
    };
    let Some(first) = rows.first() else {
        return;
    };
    // Feed accepted rows through an engine; errors are fine, panics are not.
    let mut state = ForwardBoundState::new(ForwardKind::SubGaussian, first.obs.loss.len());
    for row in &rows {
        let _ = state.update_with_lambda(row.lambda.unwrap_or(0.1), &row.obs);
    }
});
