//! Terrain-aware simulator for probabilistic UAV area search.
//!
//! A UAV steered by a HEDAC potential field (heading) and a lattice MPC
//! (altitude and speed) flies over a DEM. A nadir camera with a GSD-dependent
//! detector recall accumulates coverage, from which the undetected-target
//! density and the search accomplishment follow. Monte Carlo targets check
//! the predicted accomplishment. The [`tiling`] module holds the image tiling
//! and recall-per-GSD evaluation used to calibrate the detector model.

pub mod error;
pub mod export;
pub mod geom;
pub mod hedac;
pub mod mission_sim;
pub mod mpc;
pub mod poisson;
pub mod scenario;
pub mod search_domain;
pub mod sensing;
pub mod terrain;
pub mod tiling;
pub mod uav_control;

pub use error::{Error, Result};
