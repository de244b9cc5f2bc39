#![no_main]

use libfuzzer_sys::fuzz_target;
use sarsim::sensing::RecallTable;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = RecallTable::parse(text) {
        let canonical = table.to_text();
        let again = RecallTable::parse(&canonical).expect("printed table parses");
        assert_eq!(again.to_text(), canonical);
    }
});
