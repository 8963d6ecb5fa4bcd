#![no_main]

use libfuzzer_sys::fuzz_target;
use salt_core::ring::RingParams;
use salt_core::rlwe::keygen;
use salt_core::storage::decrypt_segment;
use std::sync::OnceLock;

fuzz_target!(|data: &[u8]| {
    static KEYS: OnceLock<salt_core::rlwe::KeyPair> = OnceLock::new();
    let params = RingParams::default();
    let keys = KEYS.get_or_init(|| keygen(&params, 1).unwrap());
    let _ = decrypt_segment(data, 0, &keys.secret, &params);
});
