#![no_main]

use libfuzzer_sys::fuzz_target;
use salt_core::storage::PoolLayout;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(layout) = PoolLayout::parse(text, Path::new("/nonexistent")) {
        let again = PoolLayout::parse(&layout.to_text(), Path::new("/nonexistent")).unwrap();
        assert_eq!(again.to_text(), layout.to_text());
    }
});
