#![no_main]

use libfuzzer_sys::fuzz_target;
use silp_core::harness::ExperimentConfig;

// Input: lines of `KEY=VALUE` applied as environment overrides to an empty config.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let vars: Vec<(String, String)> = text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let _ = ExperimentConfig::from_toml_with_overrides("", vars);
});
