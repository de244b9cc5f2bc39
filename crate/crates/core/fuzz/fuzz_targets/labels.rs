#![no_main]

use libfuzzer_sys::fuzz_target;
use sarsim::tiling::{format_labels, parse_detections, parse_labels};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(labels) = parse_labels(text) {
        let again = parse_labels(&format_labels(&labels)).expect("formatted labels parse");
        assert_eq!(again.len(), labels.len());
        for (a, b) in labels.iter().zip(&again) {
            assert_eq!(a.class, b.class);
            assert!((a.cx - b.cx).abs() <= 5e-7 && (a.w - b.w).abs() <= 5e-7);
        }
    }
    let _ = parse_detections(text);
});
