#![no_main]

use libfuzzer_sys::fuzz_target;
use silp_core::buffer::{read_transitions_csv, write_transitions_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(ts) = read_transitions_csv(data, 3) {
        let mut out = Vec::new();
        write_transitions_csv(&mut out, 3, &ts).expect("write");
        assert_eq!(read_transitions_csv(out.as_slice(), 3).expect("reparse"), ts);
    }
});
