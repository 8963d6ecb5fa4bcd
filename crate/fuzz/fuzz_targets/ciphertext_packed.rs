#![no_main]

use libfuzzer_sys::fuzz_target;
use salt_core::ring::RingParams;
use salt_core::rlwe::Ciphertext;

fuzz_target!(|data: &[u8]| {
    let params = RingParams::default();
    if let Ok(ct) = Ciphertext::from_packed(data, &params) {
        let mut out = Vec::new();
        ct.to_packed(&mut out);
        assert_eq!(out, data);
    }
});
