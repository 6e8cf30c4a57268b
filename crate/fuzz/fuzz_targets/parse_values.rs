#![no_main]

use libfuzzer_sys::fuzz_target;
use squeezecool::scenario::{parse_number, parse_values};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_number(text);
        if let Ok(values) = parse_values(text) {
            assert!(!values.is_empty());
        }
    }
});
