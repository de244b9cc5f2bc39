#![no_main]

use libfuzzer_sys::fuzz_target;
use sarsim::scenario::{apply_override, scenario_from_value};

// First line is the JSON document, the rest one override per line.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let mut lines = text.lines();
    let Some(Ok(mut doc)) = lines.next().map(serde_json::from_str::<serde_json::Value>) else { return };
    for line in lines {
        if apply_override(&mut doc, line).is_err() {
            return;
        }
    }
    let _ = scenario_from_value(doc);
});
