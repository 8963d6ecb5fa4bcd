#![no_main]

use libfuzzer_sys::fuzz_target;
use salt_core::storage::ArchiveContainer;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = ArchiveContainer::from_bytes(data) {
        assert_eq!(c.to_bytes(), data);
        for i in 0..c.segment_count() {
            let _ = c.segment(i);
        }
        let _ = c.verify();
    }
});
