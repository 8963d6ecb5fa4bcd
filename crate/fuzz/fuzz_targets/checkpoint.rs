#![no_main]

use libfuzzer_sys::fuzz_target;
use salt_core::storage::{restore_checkpoint, save_checkpoint, CHECKPOINT_LIMIT};

fuzz_target!(|data: &[u8]| {
    if let Ok(state) = restore_checkpoint(data) {
        assert!(data.len() <= CHECKPOINT_LIMIT);
        assert_eq!(save_checkpoint(&state), data);
    }
});
