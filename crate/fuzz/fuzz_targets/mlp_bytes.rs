#![no_main]

use libfuzzer_sys::fuzz_target;
use silp_core::nn::Mlp;

fuzz_target!(|data: &[u8]| {
    if let Ok(net) = Mlp::from_bytes(data) {
        assert_eq!(net.to_bytes(), data);
    }
});
