#![no_main]

use libfuzzer_sys::fuzz_target;
use silp_core::collision_model::ClassifierHyper;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = ClassifierHyper::from_toml(text);
});
