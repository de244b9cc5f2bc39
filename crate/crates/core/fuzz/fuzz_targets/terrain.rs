#![no_main]

use libfuzzer_sys::fuzz_target;
use sarsim::terrain::TerrainGrid;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(grid) = TerrainGrid::parse(text) {
        let again = TerrainGrid::parse(&grid.to_ascii_grid()).expect("written grid parses");
        assert_eq!(again.elevations().len(), grid.elevations().len());
    }
});
