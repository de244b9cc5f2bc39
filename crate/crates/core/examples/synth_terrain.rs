//! Writes the synthetic DEM used by the shipped scenarios.
//!
//! Usage: `cargo run -p sarsim --example synth_terrain -- scenarios/terrain.asc`

use sarsim::terrain::TerrainGrid;

fn elevation(x: f64, y: f64) -> f64 {
    let hill = |cx: f64, cy: f64, s: f64| (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp();
    let z = 300.0
        + 60.0 * hill(600.0, 900.0, 350.0)
        + 40.0 * hill(1300.0, 300.0, 250.0)
        + 15.0 * (x / 230.0).sin() * (y / 310.0).cos()
        + 0.03 * x;
    (z * 100.0).round() / 100.0
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).ok_or("usage: synth_terrain <out.asc>")?;
    let grid = TerrainGrid::from_fn(90, 80, -500.0, -500.0, 30.0, elevation)?;
    std::fs::write(&path, grid.to_ascii_grid())?;
    eprintln!("{}", grid.report());
    Ok(())
}
