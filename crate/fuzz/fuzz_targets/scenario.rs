#![no_main]

use libfuzzer_sys::fuzz_target;
use salt_core::perfmodel::{parse_scenario, placement_latency};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(s) = parse_scenario(text) {
        if let Ok((latency, speedup)) = placement_latency(&s) {
            assert!(latency.is_finite() && latency > 0.0);
            assert!(speedup.is_finite() && speedup > 0.0);
        }
    }
});
