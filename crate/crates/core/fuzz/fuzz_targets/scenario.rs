#![no_main]

use libfuzzer_sys::fuzz_target;
use sarsim::scenario::parse_scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = parse_scenario(text) {
        let _ = file.zones();
    }
});
