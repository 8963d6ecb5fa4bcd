#![no_main]

use libfuzzer_sys::fuzz_target;
use salt_core::exemplar::ClusterModel;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = ClusterModel::from_bytes(data) {
        assert!(model.tau1() <= model.tau2());
        assert_eq!(model.to_bytes(), data);
    }
});
