#![no_main]

use libfuzzer_sys::fuzz_target;
use squeezecool::scenario::validate;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        match validate(text) {
            Ok(v) => {
                // accepted scenarios must expand to points without panicking
                let _ = v.scenario.points();
            }
            Err(errors) => assert!(!errors.is_empty()),
        }
    }
});
