#![no_main]

use libfuzzer_sys::fuzz_target;
use salt_core::codec::rle::{decode_runs, encode_runs};

fuzz_target!(|data: &[u8]| {
    let Some((&len, body)) = data.split_first() else {
        return;
    };
    let count = usize::from(len) * 4;
    if let Ok(values) = decode_runs(body, count, 1 << 20) {
        assert_eq!(values.len(), count);
        let mut again = Vec::new();
        encode_runs(values.iter().copied(), &mut again);
        assert_eq!(decode_runs(&again, count, 1 << 20).unwrap(), values);
    }
});
