#![no_main]

use libfuzzer_sys::fuzz_target;
use salt_core::rlwe::{Ciphertext, KeyPair, PublicKey, SecretKey};

fuzz_target!(|data: &[u8]| {
    if let Ok((k, p)) = KeyPair::from_bytes(data) {
        assert_eq!(k.to_bytes(&p), data);
    }
    if let Ok((k, p)) = PublicKey::from_bytes(data) {
        assert_eq!(k.to_bytes(&p), data);
    }
    if let Ok((k, p)) = SecretKey::from_bytes(data) {
        assert_eq!(k.to_bytes(&p), data);
    }
    if let Ok((c, p)) = Ciphertext::from_bytes(data) {
        assert_eq!(c.to_bytes(&p), data);
    }
});
