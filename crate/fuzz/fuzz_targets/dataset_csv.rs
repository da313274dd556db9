#![no_main]

use libfuzzer_sys::fuzz_target;
use silp_core::collision_model::{read_dataset_csv, write_dataset_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(samples) = read_dataset_csv(data) else { return };
    // an empty dataset cannot carry its joint count through the writer
    if samples.is_empty() {
        return;
    }
    let mut out = Vec::new();
    write_dataset_csv(&mut out, &samples).expect("write");
    assert_eq!(read_dataset_csv(out.as_slice()).expect("reparse"), samples);
});
