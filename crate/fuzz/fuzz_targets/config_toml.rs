#![no_main]

use libfuzzer_sys::fuzz_target;
use silp_core::harness::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml(text) {
        // whatever parses must survive validation and a serialization round trip
        let _ = cfg.validate();
        if let Ok(out) = cfg.to_toml() {
            let back = ExperimentConfig::from_toml(&out).expect("canonical form reparses");
            assert_eq!(back.to_toml().ok(), Some(out));
        }
    }
    let _ = ExperimentConfig::from_toml_with_overrides(text, std::iter::empty::<(String, String)>());
});
