//! Output writers: CSV logs and curves, PGM field snapshots with JSON
//! sidecars, and the run summary.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hedac::FieldState;
use crate::mission_sim::{FlightReport, MissionReport, SeedCheck, Violations};
use crate::search_domain::GridSpec;

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::invalid(format!("{}: {other:?}", path.display())),
    }
}

/// Writes serializable rows as CSV with a header.
pub fn write_csv_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per 0.5 s kinematic step; `t` is flight time, `mission_t`
/// includes the preceding flights.
pub fn write_flight_log(path: &Path, flight_number: usize, flight: &FlightReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record([
        "flight", "mission_t", "t", "x", "y", "z", "heading", "v_h", "v_z", "rho", "phi", "omega", "eta", "ground",
        "floor_ok", "velocity_ok", "acceleration_ok",
    ])
    .map_err(|e| csv_error(path, e))?;
    for s in &flight.log.samples {
        w.write_record(&[
            flight_number.to_string(),
            (flight.start_time + s.t).to_string(),
            s.t.to_string(),
            s.x.to_string(),
            s.y.to_string(),
            s.z.to_string(),
            s.heading.to_string(),
            s.v_h.to_string(),
            s.v_z.to_string(),
            s.rho.to_string(),
            s.phi.to_string(),
            s.omega.to_string(),
            s.eta.to_string(),
            s.ground.to_string(),
            s.floor_ok.to_string(),
            s.velocity_ok.to_string(),
            s.acceleration_ok.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct EtaRow {
    t: f64,
    eta: f64,
}

pub fn write_eta_curve(path: &Path, eta: &[(f64, f64)]) -> Result<()> {
    write_csv_rows(path, eta.iter().map(|&(t, eta)| EtaRow { t, eta }))
}

#[derive(Serialize)]
struct FieldRow {
    col: usize,
    row: usize,
    x: f64,
    y: f64,
    m0: f64,
    c: f64,
    m: f64,
    u: f64,
}

/// Every cell of the field at full precision, for offline recomputation.
pub fn write_field_csv(path: &Path, field: &FieldState) -> Result<()> {
    let spec = *field.spec();
    let rows = (0..spec.len()).map(|k| {
        let p = spec.center_of(k);
        FieldRow {
            col: k % spec.ncols,
            row: k / spec.ncols,
            x: p.x,
            y: p.y,
            m0: field.m0().values[k],
            c: field.coverage()[k],
            m: field.density()[k],
            u: field.potential()[k],
        }
    });
    write_csv_rows(path, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PgmSidecar {
    pub quantity: String,
    pub ncols: usize,
    pub nrows: usize,
    pub x_origin: f64,
    pub y_origin: f64,
    pub cell_size: f64,
    /// Value mapped to grey level 0.
    pub min: f64,
    /// Value mapped to grey level 255.
    pub max: f64,
    pub first_row: &'static str,
}

/// 8-bit binary PGM scaled linearly from min to max, northernmost row first.
pub fn encode_pgm(spec: &GridSpec, values: &[f64]) -> (Vec<u8>, f64, f64) {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = max - min;
    let mut out = format!("P5\n{} {}\n255\n", spec.ncols, spec.nrows).into_bytes();
    for row in (0..spec.nrows).rev() {
        for col in 0..spec.ncols {
            let v = values[spec.index(col, row)];
            let g = if span > 0.0 { ((v - min) / span * 255.0).round() } else { 0.0 };
            out.push(g as u8);
        }
    }
    (out, min, max)
}

/// Writes `<stem>.pgm` and `<stem>.json` for one field quantity.
pub fn write_pgm(dir: &Path, stem: &str, quantity: &str, spec: &GridSpec, values: &[f64]) -> Result<()> {
    let (bytes, min, max) = encode_pgm(spec, values);
    let pgm = dir.join(format!("{stem}.pgm"));
    fs::write(&pgm, bytes).map_err(|e| Error::io(&pgm, e))?;
    let sidecar = PgmSidecar {
        quantity: quantity.to_string(),
        ncols: spec.ncols,
        nrows: spec.nrows,
        x_origin: spec.x_origin,
        y_origin: spec.y_origin,
        cell_size: spec.cell_size,
        min,
        max,
        first_row: "north",
    };
    write_json(&dir.join(format!("{stem}.json")), &sidecar)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
    text.push('\n');
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Serialize)]
pub struct FlightSummary {
    pub start_time: f64,
    pub duration: f64,
    pub samples: usize,
    pub final_eta: f64,
    pub violations: Violations,
    pub heading_floor_plans: usize,
    pub max_solver_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub mission: String,
    pub seed: u64,
    pub final_eta: f64,
    pub violations: Violations,
    pub constraint_violations: usize,
    pub flights: Vec<FlightSummary>,
    /// Wall-clock seconds; only present when timing is requested, so that
    /// summaries stay byte-identical across reruns otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationSummary>,
}

impl RunSummary {
    pub fn new(report: &MissionReport, seed: u64) -> Self {
        let flights = report
            .flights
            .iter()
            .map(|f| FlightSummary {
                start_time: f.start_time,
                duration: f.config.duration,
                samples: f.log.samples.len(),
                final_eta: f.log.samples.last().map_or(0.0, |s| s.eta),
                violations: f.log.violations,
                heading_floor_plans: f.log.heading_floor_plans,
                max_solver_iterations: f.log.max_solver_iterations,
            })
            .collect();
        let violations = report.violations();
        Self {
            mission: report.id.clone(),
            seed,
            final_eta: report.final_eta(),
            violations,
            constraint_violations: violations.total(),
            flights,
            runtime_seconds: None,
            validation: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedVerdict {
    pub seed: u64,
    pub detected: usize,
    pub samples_outside_band: usize,
    pub within_band: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationSummary {
    pub targets: usize,
    pub band_tail_probability: f64,
    pub verdict: String,
    pub seeds: Vec<SeedVerdict>,
}

impl ValidationSummary {
    pub fn new(targets: usize, seeds: &[SeedCheck]) -> Self {
        let seeds: Vec<SeedVerdict> = seeds
            .iter()
            .map(|s| SeedVerdict {
                seed: s.tracker.seed,
                detected: s.tracker.detected_count(),
                samples_outside_band: s.outside_count(),
                within_band: s.within_band(),
            })
            .collect();
        let verdict = if seeds.iter().all(|s| s.within_band) {
            "within band"
        } else {
            "outside band"
        };
        Self {
            targets,
            band_tail_probability: crate::mission_sim::BAND_TAIL,
            verdict: verdict.to_string(),
            seeds,
        }
    }
}

/// Empirical-vs-predicted curve of one seed.
pub fn write_band_curve(path: &Path, check: &SeedCheck) -> Result<()> {
    write_csv_rows(path, &check.samples)
}

#[derive(Serialize)]
struct TargetRow {
    index: usize,
    x: f64,
    y: f64,
    threshold: f64,
    first_detection_time: Option<f64>,
}

pub fn write_targets(path: &Path, check: &SeedCheck) -> Result<()> {
    let rows = check.tracker.targets.iter().enumerate().map(|(index, t)| TargetRow {
        index,
        x: t.position.x,
        y: t.position.y,
        threshold: t.threshold,
        first_detection_time: t.first_detection_time,
    });
    write_csv_rows(path, rows)
}

/// Writes the standard set of mission outputs into `dir`.
pub fn write_mission_outputs(dir: &Path, report: &MissionReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in report.flights.iter().enumerate() {
        write_flight_log(&dir.join(format!("flight{}_log.csv", i + 1)), i + 1, f)?;
    }
    write_eta_curve(&dir.join("eta.csv"), &report.eta)?;
    write_field_csv(&dir.join("field.csv"), &report.field)?;
    let spec = report.field.spec();
    write_pgm(dir, "coverage", "coverage c", spec, report.field.coverage())?;
    write_pgm(dir, "density", "undetected density m", spec, report.field.density())?;
    write_pgm(dir, "potential", "potential u", spec, report.field.potential())?;
    Ok(())
}
