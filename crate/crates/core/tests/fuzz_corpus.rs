//! Replays the checked-in fuzz corpus through the same checks the fuzz
//! targets perform, so regressions surface without a nightly toolchain.

use std::fs;
use std::path::Path;

use squeezecool::scenario::{parse_number, parse_values, validate};

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.display().to_string(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

#[test]
fn parse_scenario_corpus() {
    for (name, data) in corpus("parse_scenario") {
        let Ok(text) = std::str::from_utf8(&data) else { continue };
        match validate(text) {
            Ok(v) => {
                let _ = v.scenario.points();
            }
            Err(errors) => assert!(!errors.is_empty(), "{name}"),
        }
    }
}

#[test]
fn scenario_roundtrip_corpus() {
    for (name, data) in corpus("scenario_roundtrip") {
        let Ok(text) = std::str::from_utf8(&data) else { continue };
        let Ok(first) = validate(text) else { continue };
        let rendered = first.scenario.render();
        let second = validate(&rendered).unwrap_or_else(|e| panic!("{name}: {e:?}"));
        assert_eq!(first.scenario, second.scenario, "{name}");
        assert_eq!(rendered, second.scenario.render(), "{name}");
    }
}

#[test]
fn parse_values_corpus() {
    for (_, data) in corpus("parse_values") {
        let Ok(text) = std::str::from_utf8(&data) else { continue };
        let _ = parse_number(text);
        if let Ok(v) = parse_values(text) {
            assert!(!v.is_empty());
        }
    }
}
