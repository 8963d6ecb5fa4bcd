#![no_main]

use libfuzzer_sys::fuzz_target;
use salt_core::codec::{decode_gop, EncodedGop};

fuzz_target!(|data: &[u8]| {
    let Ok(gop) = EncodedGop::from_bytes(data) else {
        return;
    };
    assert_eq!(EncodedGop::from_bytes(&gop.to_bytes()).unwrap(), gop);
    // keep decoded frames small enough for the fuzzer's memory limit
    if gop.width() * gop.height() > 1 << 16 {
        return;
    }
    for k in 1..=gop.num_layers() {
        if let Ok(frames) = decode_gop(&gop, k) {
            assert_eq!(frames.len(), gop.frame_count());
        }
    }
});
