//! Runs the checked-in fuzz corpus seeds through each parser, with the same
//! round-trip checks the fuzz targets make.

use std::path::{Path, PathBuf};

use sarsim::scenario::{apply_override, parse_scenario, scenario_from_value};
use sarsim::sensing::RecallTable;
use sarsim::terrain::TerrainGrid;
use sarsim::tiling::{format_labels, parse_detections, parse_labels, parse_manifest};

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<(PathBuf, String)> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let text = std::fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn terrain_seeds_parse_and_round_trip() {
    for (path, text) in seeds("terrain") {
        let grid = TerrainGrid::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = TerrainGrid::parse(&grid.to_ascii_grid()).unwrap();
        assert_eq!(again.elevations(), grid.elevations());
    }
}

#[test]
fn recall_table_seeds_print_canonically() {
    for (path, text) in seeds("recall_table") {
        let table = RecallTable::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let canonical = table.to_text();
        assert_eq!(RecallTable::parse(&canonical).unwrap().to_text(), canonical);
    }
}

#[test]
fn scenario_seeds_parse() {
    for (path, text) in seeds("scenario") {
        let file = parse_scenario(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        file.zones().unwrap();
    }
    for (path, text) in seeds("scenario_override") {
        let mut lines = text.lines();
        let mut doc: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
        for line in lines {
            apply_override(&mut doc, line).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        }
        scenario_from_value(doc).unwrap();
    }
}

#[test]
fn label_and_manifest_seeds_parse() {
    let mut gt = 0;
    let mut det = 0;
    for (_, text) in seeds("labels") {
        if let Ok(labels) = parse_labels(&text) {
            let again = parse_labels(&format_labels(&labels)).unwrap();
            assert_eq!(again.len(), labels.len());
            gt += 1;
        }
        det += usize::from(parse_detections(&text).is_ok());
    }
    assert!(gt > 0 && det > 0);
    for (path, text) in seeds("manifest") {
        let metas = parse_manifest(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(metas.iter().all(|m| m.validate().is_ok()));
    }
}
