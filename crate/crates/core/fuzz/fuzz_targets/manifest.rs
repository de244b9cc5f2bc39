#![no_main]

use libfuzzer_sys::fuzz_target;
use sarsim::tiling::parse_manifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(metas) = parse_manifest(text) {
        for m in &metas {
            assert!(m.validate().is_ok());
        }
    }
});
