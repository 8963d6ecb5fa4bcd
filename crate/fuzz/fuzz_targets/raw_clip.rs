#![no_main]

use libfuzzer_sys::fuzz_target;
use salt_core::codec::{read_raw_clip, write_raw_clip};

fuzz_target!(|data: &[u8]| {
    if let Ok(frames) = read_raw_clip(data) {
        assert_eq!(write_raw_clip(&frames).unwrap(), data);
    }
});
