#![no_main]

use libfuzzer_sys::fuzz_target;
use squeezecool::scenario::validate;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(first) = validate(text) else { return };
    let rendered = first.scenario.render();
    let second = validate(&rendered).expect("rendered scenario must validate");
    assert_eq!(first.scenario, second.scenario);
    assert_eq!(rendered, second.scenario.render());
});
