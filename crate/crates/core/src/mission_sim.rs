//! Flight and mission loops, and Monte Carlo validation of the predicted
//! search accomplishment.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{wrap_angle, Point2, Point3};
use crate::hedac::{FieldState, HedacParams};
use crate::mpc::{FloorModel, MpcConfig, Planner};
use crate::search_domain::{build_flight_domain, zone_membership, Rect, SearchDomain, Zone};
use crate::sensing::{CameraModel, CameraPose, RecallTable, SensingParams, SensorContext};
use crate::terrain::TerrainGrid;
use crate::uav_control::{kinematic_step, ramp_control, steer_heading, UavLimits, UavState, LIMIT_TOLERANCE};

/// Kinematic integration step, s.
pub const KINEMATIC_STEP: f64 = 0.5;
/// Coverage, field and heading update interval, s.
pub const CONTROL_STEP: f64 = 1.0;
/// No-fly clearance above ground that applies to every flight, m.
pub const GLOBAL_FLOOR: f64 = 35.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FlightStart {
    /// Take off at a home point `[x, y]`, already at goal height and at rest.
    Home([f64; 2]),
    /// Resume from the state the previous flight of the mission ended in.
    Continue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlightConfig {
    pub uav: String,
    pub camera: String,
    pub min_altitude: f64,
    pub goal_altitude: f64,
    /// Ids of the zones this flight searches; the UAV steers toward their
    /// undetected density and stays within their offset bounding box.
    pub zones: Vec<String>,
    /// Seconds.
    pub duration: f64,
    pub start: FlightStart,
}

impl FlightConfig {
    /// Altitude floor above ground for this flight.
    pub fn floor(&self) -> f64 {
        self.min_altitude.max(GLOBAL_FLOOR)
    }
}

/// Everything needed to run one mission.
#[derive(Debug, Clone)]
pub struct MissionConfig {
    pub id: String,
    pub flights: Vec<FlightConfig>,
    pub zones: Vec<Zone>,
    pub offset: f64,
    pub cell_size: f64,
    pub hedac: HedacParams,
    pub sensing: SensingParams,
    /// Planner weights and lattice; heights are taken from each flight.
    pub mpc: MpcConfig,
    pub seed: u64,
    pub terrain: TerrainGrid,
    pub recall: RecallTable,
    /// Airframes and cameras beyond the built-in presets, by name.
    pub uavs: BTreeMap<String, UavLimits>,
    pub cameras: BTreeMap<String, CameraModel>,
}

impl MissionConfig {
    pub fn uav(&self, name: &str) -> Result<UavLimits> {
        self.uavs
            .get(name)
            .cloned()
            .or_else(|| UavLimits::preset(name))
            .ok_or_else(|| Error::invalid(format!("unknown UAV `{name}`")))
    }

    pub fn camera(&self, name: &str) -> Result<CameraModel> {
        self.cameras
            .get(name)
            .cloned()
            .or_else(|| CameraModel::preset(name))
            .ok_or_else(|| Error::invalid(format!("unknown camera `{name}`")))
    }

    pub fn domain(&self) -> Result<SearchDomain> {
        build_flight_domain(&self.zones, self.offset, self.cell_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.flights.is_empty() {
            return Err(Error::invalid(format!("mission `{}` has no flights", self.id)));
        }
        self.hedac.validate()?;
        self.sensing.validate()?;
        let domain = self.domain()?;
        let g = &domain.grid;
        for (x, y) in [(g.x_origin, g.y_origin), (g.x_max(), g.y_max())] {
            if !self.terrain.contains(x, y) {
                return Err(Error::OutOfExtent {
                    what: "terrain (flight domain corner)",
                    x,
                    y,
                });
            }
        }
        for (i, f) in self.flights.iter().enumerate() {
            let n = i + 1;
            self.uav(&f.uav)?.validate()?;
            self.camera(&f.camera)?.validate()?;
            if !(f.min_altitude >= GLOBAL_FLOOR && f.goal_altitude >= f.min_altitude && f.goal_altitude.is_finite()) {
                return Err(Error::invalid(format!(
                    "flight {n}: need goal altitude {} >= min altitude {} >= {GLOBAL_FLOOR}",
                    f.goal_altitude, f.min_altitude
                )));
            }
            if !(f.duration >= 0.0 && f.duration.is_finite()) {
                return Err(Error::invalid(format!("flight {n}: duration must be non-negative")));
            }
            let steps = f.duration / CONTROL_STEP;
            if (steps - steps.round()).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "flight {n}: duration {} s is not a whole number of {CONTROL_STEP} s control steps",
                    f.duration
                )));
            }
            if f.zones.is_empty() {
                return Err(Error::invalid(format!("flight {n}: no zones")));
            }
            for z in &f.zones {
                if !self.zones.iter().any(|m| &m.id == z) {
                    return Err(Error::invalid(format!("flight {n}: zone `{z}` is not a mission zone")));
                }
            }
            match f.start {
                FlightStart::Home([x, y]) => {
                    if !g.contains(Point2::new(x, y)) {
                        return Err(Error::OutOfExtent {
                            what: "flight domain (home point)",
                            x,
                            y,
                        });
                    }
                }
                FlightStart::Continue if i == 0 => {
                    return Err(Error::invalid("flight 1 cannot continue a previous flight"));
                }
                FlightStart::Continue => {}
            }
            let mut mpc = self.mpc.clone();
            mpc.h_min = f.floor();
            mpc.h_goal = f.goal_altitude;
            mpc.validate()?;
            if (mpc.integration_step - KINEMATIC_STEP).abs() > 1e-12 {
                return Err(Error::invalid(format!("MPC integration step must be {KINEMATIC_STEP} s")));
            }
            let replan = mpc.step_duration() / CONTROL_STEP;
            if (replan - replan.round()).abs() > 1e-9 || replan < 1.0 - 1e-9 {
                return Err(Error::invalid("MPC step must be a whole number of control steps"));
            }
        }
        Ok(())
    }
}

/// One logged kinematic step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogSample {
    /// Seconds since the flight started.
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub heading: f64,
    pub v_h: f64,
    pub v_z: f64,
    pub rho: f64,
    pub phi: f64,
    pub omega: f64,
    pub eta: f64,
    pub ground: f64,
    pub floor_ok: bool,
    pub velocity_ok: bool,
    pub acceleration_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Violations {
    pub floor: usize,
    pub velocity: usize,
    pub acceleration: usize,
}

impl Violations {
    pub fn total(&self) -> usize {
        self.floor + self.velocity + self.acceleration
    }

    fn add(&mut self, other: Violations) {
        self.floor += other.floor;
        self.velocity += other.velocity;
        self.acceleration += other.acceleration;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlightLog {
    pub samples: Vec<LogSample>,
    pub violations: Violations,
    /// Plans whose first step was only checked along the current heading.
    pub heading_floor_plans: usize,
    pub max_solver_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlightReport {
    pub config: FlightConfig,
    /// Mission time at take-off, s.
    pub start_time: f64,
    pub log: FlightLog,
}

#[derive(Debug, Clone)]
pub struct MissionReport {
    pub id: String,
    pub flights: Vec<FlightReport>,
    /// `(mission time, accomplishment)` at take-off and after every control step.
    pub eta: Vec<(f64, f64)>,
    pub field: FieldState,
    pub domain: SearchDomain,
    pub final_state: Option<UavState>,
}

impl MissionReport {
    pub fn final_eta(&self) -> f64 {
        self.eta.last().map_or(0.0, |e| e.1)
    }

    pub fn violations(&self) -> Violations {
        let mut v = Violations::default();
        for f in &self.flights {
            v.add(f.log.violations);
        }
        v
    }

    pub fn sample_count(&self) -> usize {
        self.flights.iter().map(|f| f.log.samples.len()).sum()
    }
}

/// Receives coverage after every control step.
pub trait CoverageObserver {
    /// `coverage` is the field after the step ending at mission time `t`,
    /// which started at `t - dt`.
    fn observe(&mut self, t: f64, dt: f64, coverage: &[f64]);
}

impl CoverageObserver for () {
    fn observe(&mut self, _: f64, _: f64, _: &[f64]) {}
}

/// Mission-level state shared by consecutive flights.
pub struct MissionRun<'a> {
    pub config: &'a MissionConfig,
    pub domain: SearchDomain,
    membership: Vec<Option<usize>>,
    pub field: FieldState,
    pub uav: Option<UavState>,
    pub time: f64,
    pub eta: Vec<(f64, f64)>,
}

impl<'a> MissionRun<'a> {
    pub fn new(config: &'a MissionConfig) -> Result<Self> {
        config.validate()?;
        let domain = config.domain()?;
        let membership = zone_membership(&domain.zones, domain.grid)?;
        let field = FieldState::new(domain.initial_density()?);
        let eta = vec![(0.0, field.accomplishment())];
        Ok(Self {
            config,
            domain,
            membership,
            field,
            uav: None,
            time: 0.0,
            eta,
        })
    }

    /// Flies one flight, continuing the shared field state.
    pub fn run_flight(&mut self, flight: &FlightConfig, observer: &mut dyn CoverageObserver) -> Result<FlightReport> {
        let cfg = self.config;
        let terrain = &cfg.terrain;
        let limits = cfg.uav(&flight.uav)?;
        let camera = cfg.camera(&flight.camera)?;
        let sensor = SensorContext::new(&camera, terrain, &cfg.recall, cfg.sensing);
        let mut mpc = cfg.mpc.clone();
        mpc.h_min = flight.floor();
        mpc.h_goal = flight.goal_altitude;
        let planner = Planner::new(&limits, &mpc)?;

        let zone_ids: Vec<usize> = flight
            .zones
            .iter()
            .map(|id| {
                self.domain
                    .zones
                    .iter()
                    .position(|z| &z.id == id)
                    .ok_or_else(|| Error::invalid(format!("unknown zone `{id}`")))
            })
            .collect::<Result<_>>()?;
        let mask: Vec<bool> = self.membership.iter().map(|m| m.is_some_and(|z| zone_ids.contains(&z))).collect();
        let bounds = flight_bounds(&self.domain, &zone_ids);

        let start_time = self.time;
        let mut state = match flight.start {
            FlightStart::Home([x, y]) => {
                let ground = terrain.elevation_at(x, y)?;
                let to_center = bounds.center();
                let heading = if to_center == Point2::new(x, y) {
                    0.0
                } else {
                    (to_center.y - y).atan2(to_center.x - x)
                };
                UavState::at_rest(Point3::new(x, y, ground + flight.goal_altitude), heading)
            }
            FlightStart::Continue => self
                .uav
                .ok_or_else(|| Error::invalid("no previous flight to continue"))?,
        };
        state.t = 0.0;

        let mut log = FlightLog::default();
        let steps = (flight.duration / KINEMATIC_STEP).round() as usize;
        if steps == 0 {
            self.uav = Some(state);
            return Ok(FlightReport {
                config: flight.clone(),
                start_time,
                log,
            });
        }
        let control_every = (CONTROL_STEP / KINEMATIC_STEP).round() as usize;
        let plan_every = (mpc.step_duration() / KINEMATIC_STEP).round() as usize;

        let stats = self.field.solve_potential_masked(&cfg.hedac, Some(&mask))?;
        log.max_solver_iterations = stats.iterations;
        let mut eta = self.field.accomplishment();
        let mut target = (0.0, 0.0);
        let mut omega = 0.0;
        for k in 0..steps {
            if k % plan_every == 0 {
                let plan = planner.plan(&state, terrain)?;
                if plan.floor_model == FloorModel::Heading {
                    log.heading_floor_plans += 1;
                }
                target = plan.first_target();
            }
            if k % control_every == 0 {
                let here = state.xy();
                let desired = if bounds.contains(here) {
                    self.field.steering_gradient(here)?
                } else {
                    let c = bounds.center();
                    Some(Point2::new(c.x - here.x, c.y - here.y))
                };
                omega = match desired {
                    Some(d) => {
                        let next = steer_heading(state.heading, d, limits.omega_max(), CONTROL_STEP);
                        (wrap_angle(next - state.heading) / CONTROL_STEP).clamp(-limits.omega_max(), limits.omega_max())
                    }
                    None => 0.0,
                };
            }
            let control = ramp_control(state.v_h, state.v_z, target.0, target.1, omega, &limits, KINEMATIC_STEP);
            let prev = state;
            state = kinematic_step(&state, &control, &limits, KINEMATIC_STEP)?;
            if !state.is_finite() {
                return Err(Error::invalid(format!("UAV state became non-finite at t = {}", state.t)));
            }

            if (k + 1) % control_every == 0 {
                let pose = CameraPose {
                    position: state.position(),
                    yaw: state.heading,
                };
                self.field.accumulate_coverage(&pose, &sensor, CONTROL_STEP)?;
                eta = self.field.accomplishment();
                let now = start_time + state.t;
                self.eta.push((now, eta));
                observer.observe(now, CONTROL_STEP, self.field.coverage());
                let stats = self.field.solve_potential_masked(&cfg.hedac, Some(&mask))?;
                log.max_solver_iterations = log.max_solver_iterations.max(stats.iterations);
            }

            let ground = terrain.elevation_at(state.x, state.y)?;
            let tol = LIMIT_TOLERANCE;
            let phi_deg = control.phi.to_degrees();
            let velocity_ok = state.v_h >= limits.v_h_min - tol
                && state.v_h <= limits.v_h_max + tol
                && state.v_z >= limits.v_z_min - tol
                && state.v_z <= limits.v_z_max + tol
                && phi_deg >= limits.phi_min_deg - tol
                && phi_deg <= limits.phi_max_deg + tol
                && control.omega.abs() <= limits.omega_max() + tol;
            let a_h = (state.v_h - prev.v_h) / KINEMATIC_STEP;
            let a_v = (state.v_z - prev.v_z) / KINEMATIC_STEP;
            let acceleration_ok = a_h >= limits.a_h_min - tol
                && a_h <= limits.a_h_max + tol
                && a_v >= limits.a_v_min - tol
                && a_v <= limits.a_v_max + tol;
            let floor_ok = state.z >= ground + flight.floor() - tol;
            log.violations.floor += usize::from(!floor_ok);
            log.violations.velocity += usize::from(!velocity_ok);
            log.violations.acceleration += usize::from(!acceleration_ok);
            log.samples.push(LogSample {
                t: state.t,
                x: state.x,
                y: state.y,
                z: state.z,
                heading: state.heading,
                v_h: state.v_h,
                v_z: state.v_z,
                rho: control.rho,
                phi: control.phi,
                omega: control.omega,
                eta,
                ground,
                floor_ok,
                velocity_ok,
                acceleration_ok,
            });
        }
        self.time = start_time + state.t;
        self.uav = Some(state);
        Ok(FlightReport {
            config: flight.clone(),
            start_time,
            log,
        })
    }

    pub fn finish(self, flights: Vec<FlightReport>) -> MissionReport {
        MissionReport {
            id: self.config.id.clone(),
            flights,
            eta: self.eta,
            field: self.field,
            domain: self.domain,
            final_state: self.uav,
        }
    }
}

/// Offset bounding box of the given zones, clipped to the mission grid.
fn flight_bounds(domain: &SearchDomain, zone_ids: &[usize]) -> Rect {
    let g = &domain.grid;
    let mut r = Rect {
        x_min: f64::INFINITY,
        y_min: f64::INFINITY,
        x_max: f64::NEG_INFINITY,
        y_max: f64::NEG_INFINITY,
    };
    for &z in zone_ids {
        let b = domain.zones[z].bounds();
        r.x_min = r.x_min.min(b.x_min - domain.offset);
        r.y_min = r.y_min.min(b.y_min - domain.offset);
        r.x_max = r.x_max.max(b.x_max + domain.offset);
        r.y_max = r.y_max.max(b.y_max + domain.offset);
    }
    Rect {
        x_min: r.x_min.max(g.x_origin),
        y_min: r.y_min.max(g.y_origin),
        x_max: r.x_max.min(g.x_max()),
        y_max: r.y_max.min(g.y_max()),
    }
}

/// Runs every flight of the mission in order on one shared field.
pub fn run_mission(config: &MissionConfig) -> Result<MissionReport> {
    run_mission_observed(config, &mut ())
}

pub fn run_mission_observed(config: &MissionConfig, observer: &mut dyn CoverageObserver) -> Result<MissionReport> {
    let mut run = MissionRun::new(config)?;
    let mut flights = Vec::with_capacity(config.flights.len());
    for flight in &config.flights {
        flights.push(run.run_flight(flight, observer)?);
    }
    Ok(run.finish(flights))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SyntheticTarget {
    pub position: Point2,
    /// Coverage needed to detect the target, drawn from Exp(1).
    pub threshold: f64,
    pub first_detection_time: Option<f64>,
    #[serde(skip)]
    cell: usize,
    #[serde(skip)]
    last_coverage: f64,
}

/// Generator for the targets of one seed. Target `j` uses its own ChaCha20
/// stream `j` under a key made of the seed's little-endian bytes, so draws do
/// not depend on the target count or on evaluation order.
fn target_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Draws `count` targets: a zone with probability proportional to its person
/// count, then a uniform point of the zone's bounding box, accepted when the
/// grid cell containing it belongs to the zone.
pub fn sample_targets(domain: &SearchDomain, count: usize, seed: u64) -> Result<Vec<SyntheticTarget>> {
    if count == 0 {
        return Err(Error::invalid("target count must be at least 1"));
    }
    let grid = domain.grid;
    let membership = zone_membership(&domain.zones, grid)?;
    let total = domain.total_people();
    if total == 0 {
        return Err(Error::invalid("zones hold no people to sample targets from"));
    }
    for (k, z) in domain.zones.iter().enumerate() {
        if z.person_count > 0 && !membership.contains(&Some(k)) {
            return Err(Error::invalid(format!("zone `{}` covers no grid cell centre", z.id)));
        }
    }
    let bounds: Vec<Rect> = domain.zones.iter().map(|z| z.bounds()).collect();
    (0..count)
        .map(|j| {
            let mut rng = target_rng(seed, j as u64);
            let mut pick = rng.random_range(0..total);
            let zone = domain
                .zones
                .iter()
                .position(|z| {
                    if pick < z.person_count {
                        true
                    } else {
                        pick -= z.person_count;
                        false
                    }
                })
                .expect("pick below the total");
            let b = bounds[zone];
            let (position, cell) = loop {
                let p = Point2::new(rng.random_range(b.x_min..=b.x_max), rng.random_range(b.y_min..=b.y_max));
                if let Some(cell) = grid.cell_of(p) {
                    if membership[cell] == Some(zone) {
                        break (p, cell);
                    }
                }
            };
            let threshold = loop {
                let e: f64 = rng.sample(Exp1);
                if e > 0.0 {
                    break e;
                }
            };
            Ok(SyntheticTarget {
                position,
                threshold,
                first_detection_time: None,
                cell,
                last_coverage: 0.0,
            })
        })
        .collect()
}

/// Detection bookkeeping for one set of targets.
#[derive(Debug, Clone)]
pub struct TargetTracker {
    pub seed: u64,
    pub targets: Vec<SyntheticTarget>,
    /// Detected count at each observed time, starting with 0 at take-off.
    pub detected: Vec<usize>,
}

impl TargetTracker {
    pub fn new(seed: u64, targets: Vec<SyntheticTarget>) -> Self {
        Self {
            seed,
            targets,
            detected: vec![0],
        }
    }

    /// Targets placed by hand in grid cells, e.g. for controlled experiments.
    pub fn with_cells(seed: u64, targets: impl IntoIterator<Item = (Point2, usize, f64)>) -> Self {
        let targets = targets
            .into_iter()
            .map(|(position, cell, threshold)| SyntheticTarget {
                position,
                threshold,
                first_detection_time: None,
                cell,
                last_coverage: 0.0,
            })
            .collect();
        Self::new(seed, targets)
    }

    pub fn detected_count(&self) -> usize {
        *self.detected.last().expect("initial count")
    }
}

impl CoverageObserver for TargetTracker {
    /// A target is found once its cell's coverage reaches its threshold; the
    /// time is interpolated linearly within the step.
    fn observe(&mut self, t: f64, dt: f64, coverage: &[f64]) {
        let mut count = self.detected_count();
        for target in self.targets.iter_mut().filter(|tg| tg.first_detection_time.is_none()) {
            let c = coverage[target.cell];
            if c >= target.threshold {
                let rise = c - target.last_coverage;
                let frac = ((target.threshold - target.last_coverage) / rise).clamp(0.0, 1.0);
                target.first_detection_time = Some(t - dt + frac * dt);
                count += 1;
            }
            target.last_coverage = c;
        }
        self.detected.push(count);
    }
}

impl CoverageObserver for Vec<TargetTracker> {
    fn observe(&mut self, t: f64, dt: f64, coverage: &[f64]) {
        for tracker in self.iter_mut() {
            tracker.observe(t, dt, coverage);
        }
    }
}

/// Per-tail probability of the band, matching a one-sided 3-sigma normal tail.
pub const BAND_TAIL: f64 = 0.001_349_898_031_630_094_6;

/// Central binomial interval `[lo, hi]` of counts for `n` trials with success
/// probability `p`: `lo` is the smallest count whose lower tail exceeds
/// `tail`, `hi` the smallest count whose upper remainder is at most `tail`.
pub fn binomial_band(n: usize, p: f64, tail: f64) -> (usize, usize) {
    let p = p.clamp(0.0, 1.0);
    if p == 0.0 {
        return (0, 0);
    }
    if p == 1.0 {
        return (n, n);
    }
    // Log-space pmf, accumulated from the mode outward to avoid underflow.
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let mut ln_fact = vec![0.0; n + 1];
    for k in 1..=n {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let pmf: Vec<f64> = (0..=n)
        .map(|k| (ln_fact[n] - ln_fact[k] - ln_fact[n - k] + k as f64 * ln_p + (n - k) as f64 * ln_q).exp())
        .collect();
    let mut cdf = 0.0;
    let mut lo = None;
    let mut hi = n;
    for (k, q) in pmf.iter().enumerate() {
        cdf += q;
        if lo.is_none() && cdf > tail {
            lo = Some(k);
        }
        if cdf >= 1.0 - tail {
            hi = k;
            break;
        }
    }
    (lo.unwrap_or(0), hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandSample {
    pub t: f64,
    pub eta: f64,
    pub detected: usize,
    pub fraction: f64,
    pub lo: usize,
    pub hi: usize,
    /// Normal-approximation standard deviation of the fraction.
    pub sigma: f64,
    pub within: bool,
}

#[derive(Debug, Clone)]
pub struct SeedCheck {
    pub tracker: TargetTracker,
    pub samples: Vec<BandSample>,
}

impl SeedCheck {
    pub fn within_band(&self) -> bool {
        self.samples.iter().all(|s| s.within)
    }

    pub fn outside_count(&self) -> usize {
        self.samples.iter().filter(|s| !s.within).count()
    }
}

/// Compares a tracker's detected counts with the predicted accomplishment.
pub fn band_check(eta: &[(f64, f64)], tracker: TargetTracker) -> SeedCheck {
    let n = tracker.targets.len();
    let mut cache: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
    let samples = eta
        .iter()
        .zip(&tracker.detected)
        .map(|(&(t, p), &detected)| {
            let (lo, hi) = *cache.entry(p.to_bits()).or_insert_with(|| binomial_band(n, p, BAND_TAIL));
            BandSample {
                t,
                eta: p,
                detected,
                fraction: detected as f64 / n as f64,
                lo,
                hi,
                sigma: (p * (1.0 - p) / n as f64).sqrt(),
                within: (lo..=hi).contains(&detected),
            }
        })
        .collect();
    SeedCheck { tracker, samples }
}

#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub mission: MissionReport,
    pub seeds: Vec<SeedCheck>,
}

/// Runs the mission once while tracking `count` targets for each seed.
pub fn monte_carlo_validate(config: &MissionConfig, count: usize, seeds: &[u64]) -> Result<MonteCarloReport> {
    if count == 0 {
        return Err(Error::invalid("target count must be at least 1"));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    let domain = config.domain()?;
    let mut trackers = seeds
        .iter()
        .map(|&seed| Ok(TargetTracker::new(seed, sample_targets(&domain, count, seed)?)))
        .collect::<Result<Vec<_>>>()?;
    let mission = run_mission_observed(config, &mut trackers)?;
    let seeds = trackers.into_iter().map(|t| band_check(&mission.eta, t)).collect();
    Ok(MonteCarloReport { mission, seeds })
}
