#![no_main]

use libfuzzer_sys::fuzz_target;
use salt_core::storage::StripeMap;

fuzz_target!(|data: &[u8]| {
    if let Ok(map) = StripeMap::from_bytes(data) {
        assert_eq!(map.to_bytes(), data);
    }
});
