//! Scenario files: JSON mission descriptions with path-aware schema errors
//! and dotted `key=value` overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::hedac::HedacParams;
use crate::mission_sim::{FlightConfig, MissionConfig};
use crate::mpc::MpcConfig;
use crate::search_domain::Zone;
use crate::sensing::{CameraModel, RecallTable, SensingParams};
use crate::terrain::{load_terrain, TerrainGrid};
use crate::uav_control::UavLimits;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneSpec {
    pub id: String,
    /// Vertices `[x, y]` in metres.
    pub polygon: Vec<[f64; 2]>,
    pub person_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub cell_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSection {
    pub targets: usize,
    /// Number of consecutive seeds, starting at the scenario seed, in the
    /// extended validation suite.
    pub extended_seeds: usize,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        Self {
            targets: 2000,
            extended_seeds: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub id: String,
    /// ASCII grid DEM, relative to the scenario file.
    pub terrain: PathBuf,
    /// Recall-vs-GSD table, relative to the scenario file; the built-in table if absent.
    #[serde(default)]
    pub recall_table: Option<PathBuf>,
    pub zones: Vec<ZoneSpec>,
    pub offset: f64,
    pub grid: GridSection,
    #[serde(default)]
    pub hedac: HedacParams,
    #[serde(default)]
    pub sensing: SensingParams,
    #[serde(default)]
    pub mpc: MpcConfig,
    #[serde(default)]
    pub uavs: BTreeMap<String, UavLimits>,
    #[serde(default)]
    pub cameras: BTreeMap<String, CameraModel>,
    pub flights: Vec<FlightConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub monte_carlo: MonteCarloSection,
}

fn schema_error<E: std::fmt::Display>(e: serde_path_to_error::Error<E>) -> Error {
    let path = e.path().to_string();
    Error::Scenario {
        path,
        msg: e.into_inner().to_string(),
    }
}

/// Parses scenario JSON text.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(schema_error)
}

/// Deserializes an already parsed JSON document.
pub fn scenario_from_value(value: Value) -> Result<ScenarioFile> {
    serde_path_to_error::deserialize(value).map_err(schema_error)
}

/// Applies `key.path=value` to a JSON document. The value is read as JSON
/// when it parses, else as a string. Numeric segments index arrays.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::invalid(format!("override `{assignment}` is not key=value")))?;
    if key.is_empty() {
        return Err(Error::invalid(format!("override `{assignment}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let segments: Vec<&str> = key.split('.').collect();
    let mut node = doc;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        let bad = |msg: &str| Error::Scenario {
            path: segments[..=i].join("."),
            msg: msg.to_string(),
        };
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| bad("expected an array index"))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| bad(&format!("index out of range (length {len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(bad("cannot descend into a scalar")),
        };
    }
    unreachable!("loop returns on the last segment")
}

impl ScenarioFile {
    pub fn zones(&self) -> Result<Vec<Zone>> {
        self.zones
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let polygon = z.polygon.iter().map(|&[x, y]| Point2::new(x, y)).collect();
                Zone::new(z.id.clone(), polygon, z.person_count).map_err(|e| Error::Scenario {
                    path: format!("zones[{i}]"),
                    msg: e.to_string(),
                })
            })
            .collect()
    }

    /// Assembles a mission with already loaded terrain and recall table.
    pub fn to_mission(&self, terrain: TerrainGrid, recall: RecallTable) -> Result<MissionConfig> {
        let config = MissionConfig {
            id: self.id.clone(),
            flights: self.flights.clone(),
            zones: self.zones()?,
            offset: self.offset,
            cell_size: self.grid.cell_size,
            hedac: self.hedac,
            sensing: self.sensing,
            mpc: self.mpc.clone(),
            seed: self.seed,
            terrain,
            recall,
            uavs: self.uavs.clone(),
            cameras: self.cameras.clone(),
        };
        config.validate()?;
        Ok(config)
    }
}

/// A scenario with its external files resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub mission: MissionConfig,
}

/// Reads a scenario, applies overrides in order, and loads the files it
/// references relative to its own directory.
pub fn load_scenario(path: impl AsRef<Path>, overrides: &[String]) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = if overrides.is_empty() {
        parse_scenario(&text)?
    } else {
        let mut doc: Value = serde_json::from_str(&text).map_err(|e| Error::Scenario {
            path: ".".into(),
            msg: e.to_string(),
        })?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        scenario_from_value(doc)?
    };
    let dir = path.parent().unwrap_or(Path::new("."));
    let terrain = load_terrain(dir.join(&file.terrain))?;
    let recall = match &file.recall_table {
        Some(p) => RecallTable::load(dir.join(p))?,
        None => RecallTable::builtin(),
    };
    let mission = file.to_mission(terrain, recall)?;
    Ok(Scenario { file, mission })
}
