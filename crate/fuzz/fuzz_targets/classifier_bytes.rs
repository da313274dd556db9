#![no_main]

use libfuzzer_sys::fuzz_target;
use silp_core::collision_model::CollisionClassifier;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = CollisionClassifier::from_bytes(data) {
        assert_eq!(model.to_bytes(), data);
    }
});
