//! Receding-horizon altitude and speed planner.
//!
//! Each horizon step holds a target `(v_h, v_z)` from a lattice of
//! `(rho, phi)` controls; within a step the UAV ramps toward the target at the
//! acceleration limits over the kinematic sub-steps. The horizontal path
//! follows the current heading. The best target sequence is found by dynamic
//! programming over the horizon, with states that end a step close together
//! (same target, similar distance and altitude) merged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::terrain::TerrainGrid;
use crate::uav_control::{ramp_control, UavLimits, UavState, LIMIT_TOLERANCE};

/// Added to the flown path length when bounding the ground it can reach,
/// covering rounding in the executed positions.
const REACH_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcConfig {
    pub horizon_steps: usize,
    /// Seconds covered by the whole horizon.
    pub horizon_duration: f64,
    /// Kinematic integration step, s.
    pub integration_step: f64,
    pub w_v: f64,
    pub w_h: f64,
    /// Minimum height above ground, m.
    pub h_min: f64,
    /// Goal height above ground, m.
    pub h_goal: f64,
    pub rho_levels: usize,
    pub phi_levels: usize,
    /// Merge bin along the path, m; 0 disables merging.
    pub merge_distance: f64,
    /// Merge bin in altitude, m; 0 disables merging.
    pub merge_altitude: f64,
    /// States kept per lattice velocity after each step; 0 keeps all.
    pub beam_per_velocity: usize,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon_steps: 5,
            horizon_duration: 15.0,
            integration_step: 0.5,
            w_v: 1.0,
            w_h: 0.05,
            h_min: 35.0,
            h_goal: 55.0,
            rho_levels: 11,
            phi_levels: 11,
            merge_distance: 1.0,
            merge_altitude: 0.5,
            beam_per_velocity: 4,
        }
    }
}

impl MpcConfig {
    pub fn step_duration(&self) -> f64 {
        self.horizon_duration / self.horizon_steps as f64
    }

    /// Kinematic sub-steps per horizon step.
    pub fn substeps(&self) -> usize {
        (self.step_duration() / self.integration_step).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon_steps == 0 || !(self.horizon_duration > 0.0 && self.horizon_duration.is_finite()) {
            return Err(Error::invalid("MPC horizon needs at least one step and a positive duration"));
        }
        let ratio = self.step_duration() / self.integration_step;
        if !(self.integration_step > 0.0) || ratio < 0.5 || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "MPC step {} s is not a whole number of {} s integration steps",
                self.step_duration(),
                self.integration_step
            )));
        }
        if !(self.w_v >= 0.0 && self.w_h >= 0.0) {
            return Err(Error::invalid("MPC weights must be non-negative"));
        }
        if !(self.h_min >= 0.0 && self.h_goal >= self.h_min && self.h_goal.is_finite()) {
            return Err(Error::invalid(format!(
                "goal height {} must be at least the minimum height {}",
                self.h_goal, self.h_min
            )));
        }
        if self.rho_levels < 2 || self.phi_levels < 2 {
            return Err(Error::invalid("control lattice needs at least two levels per axis"));
        }
        if !(self.merge_distance >= 0.0 && self.merge_altitude >= 0.0) {
            return Err(Error::invalid("merge bins must be non-negative"));
        }
        Ok(())
    }
}

/// Distinct feasible `(v_h, v_z)` pairs of the `(rho, phi)` control lattice.
pub fn velocity_lattice(limits: &UavLimits, rho_levels: usize, phi_levels: usize) -> Vec<(f64, f64)> {
    let rho_max = limits.v_h_max.max(-limits.v_z_min).max(limits.v_z_max);
    let (phi_lo, phi_hi) = (limits.phi_min_deg.to_radians(), limits.phi_max_deg.to_radians());
    let mut out: Vec<(f64, f64)> = Vec::new();
    for i in 0..rho_levels {
        let rho = rho_max * i as f64 / (rho_levels - 1) as f64;
        for j in 0..phi_levels {
            let phi = phi_lo + (phi_hi - phi_lo) * j as f64 / (phi_levels - 1) as f64;
            let v_h = (rho * phi.cos()).max(0.0);
            let v_z = rho * phi.sin();
            let tol = LIMIT_TOLERANCE;
            if v_h < limits.v_h_min - tol || v_h > limits.v_h_max + tol || v_z < limits.v_z_min - tol || v_z > limits.v_z_max + tol {
                continue;
            }
            let v = (v_h.clamp(limits.v_h_min, limits.v_h_max), v_z.clamp(limits.v_z_min, limits.v_z_max));
            if !out.iter().any(|w| (w.0 - v.0).abs() < 1e-9 && (w.1 - v.1).abs() < 1e-9) {
                out.push(v);
            }
        }
    }
    out
}

/// Ground elevation along a straight path from a start point, sampled finely
/// and interpolated linearly. Points past the terrain edge are clamped onto it.
#[derive(Debug, Clone)]
pub struct TerrainProfile {
    inv_spacing: f64,
    samples: Vec<f64>,
}

impl TerrainProfile {
    pub const SPACING: f64 = 0.25;

    pub fn along(terrain: &TerrainGrid, start: Point2, heading: f64, length: f64) -> Result<Self> {
        let spacing = Self::SPACING;
        let n = (length.max(0.0) / spacing).ceil() as usize + 2;
        let (s, c) = heading.sin_cos();
        let samples = (0..n)
            .map(|k| {
                let d = k as f64 * spacing;
                let p = terrain.clamp_to_extent(Point2::new(start.x + d * c, start.y + d * s));
                terrain.elevation_at(p.x, p.y)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            inv_spacing: 1.0 / spacing,
            samples,
        })
    }

    pub fn elevation(&self, distance: f64) -> f64 {
        let f = (distance * self.inv_spacing).max(0.0);
        let last = self.samples.len() - 1;
        let k = (f.floor() as usize).min(last - 1);
        let t = (f - k as f64).min(1.0);
        self.samples[k] + (self.samples[k + 1] - self.samples[k]) * t
    }
}

/// How the first horizon step is checked against the ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorModel {
    /// Highest ground within the distance flown so far, whatever the heading.
    AnyHeading,
    /// Ground along the current heading only.
    Heading,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedStep {
    pub target_v_h: f64,
    pub target_v_z: f64,
    /// Distance along the heading at the end of the step, m.
    pub distance: f64,
    pub z: f64,
    pub ground: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcPlan {
    pub steps: Vec<PlannedStep>,
    pub total_cost: f64,
    pub floor_model: FloorModel,
}

impl MpcPlan {
    pub fn first_target(&self) -> (f64, f64) {
        (self.steps[0].target_v_h, self.steps[0].target_v_z)
    }
}

/// Position and velocity after each sub-step of a ramp between two targets,
/// relative to the start of the step.
#[derive(Debug, Clone)]
struct Transition {
    to: usize,
    /// `(distance, climb)` after each sub-step.
    offsets: Vec<(f64, f64)>,
}

/// Planner for one airframe and configuration. Building it tabulates the
/// ramps between every pair of lattice targets.
#[derive(Debug, Clone)]
pub struct Planner {
    limits: UavLimits,
    config: MpcConfig,
    lattice: Vec<(f64, f64)>,
    transitions: Vec<Vec<Transition>>,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    vel: usize,
    distance: f64,
    z: f64,
    cost: f64,
    parent: usize,
}

impl Planner {
    pub fn new(limits: &UavLimits, config: &MpcConfig) -> Result<Self> {
        limits.validate()?;
        config.validate()?;
        let lattice = velocity_lattice(limits, config.rho_levels, config.phi_levels);
        let mut planner = Self {
            limits: limits.clone(),
            config: config.clone(),
            lattice,
            transitions: Vec::new(),
        };
        planner.transitions = (0..planner.lattice.len())
            .map(|a| {
                let (v_h, v_z) = planner.lattice[a];
                (0..planner.lattice.len())
                    .filter(|&b| planner.reachable(v_h, v_z, b))
                    .map(|b| {
                        let mut offsets = Vec::with_capacity(config.substeps());
                        let (mut d, mut z) = (0.0, 0.0);
                        planner.ramp(v_h, v_z, b, |vh, vz, dt| {
                            d += vh * dt;
                            z += vz * dt;
                            offsets.push((d, z));
                        });
                        Transition { to: b, offsets }
                    })
                    .collect()
            })
            .collect();
        Ok(planner)
    }

    pub fn config(&self) -> &MpcConfig {
        &self.config
    }

    pub fn limits(&self) -> &UavLimits {
        &self.limits
    }

    pub fn lattice(&self) -> &[(f64, f64)] {
        &self.lattice
    }

    /// Whether lattice target `b` can be reached from `(v_h, v_z)` within one step.
    fn reachable(&self, v_h: f64, v_z: f64, b: usize) -> bool {
        let t = self.config.step_duration();
        let (th, tz) = self.lattice[b];
        let l = &self.limits;
        let tol = LIMIT_TOLERANCE;
        let dh = th - v_h;
        let dz = tz - v_z;
        dh >= l.a_h_min * t - tol && dh <= l.a_h_max * t + tol && dz >= l.a_v_min * t - tol && dz <= l.a_v_max * t + tol
    }

    /// Runs the sub-steps of one horizon step, reporting the executed velocities.
    fn ramp(&self, mut v_h: f64, mut v_z: f64, b: usize, mut visit: impl FnMut(f64, f64, f64)) {
        let dt = self.config.integration_step;
        let (th, tz) = self.lattice[b];
        for _ in 0..self.config.substeps() {
            let c = ramp_control(v_h, v_z, th, tz, 0.0, &self.limits, dt);
            v_h = c.v_h();
            v_z = c.v_z();
            visit(v_h, v_z, dt);
        }
    }

    fn step_cost(&self, v_h: f64, z: f64, ground: f64) -> f64 {
        let e = z - ground - self.config.h_goal;
        -self.config.w_v * v_h + self.config.w_h * e * e
    }

    /// Plans the horizon from `state`, following its current heading.
    ///
    /// The first step is checked against the highest ground reachable in the
    /// distance flown, so it stays safe while the heading changes during
    /// execution. If that admits no plan, the ground along the heading is
    /// used instead; if that fails too the altitude floor cannot be held.
    pub fn plan(&self, state: &UavState, terrain: &TerrainGrid) -> Result<MpcPlan> {
        let reach = self.config.horizon_duration * self.limits.v_h_max + 1.0;
        let profile = TerrainProfile::along(terrain, state.xy(), state.heading, reach)?;
        for model in [FloorModel::AnyHeading, FloorModel::Heading] {
            if let Some(plan) = self.plan_with(state, terrain, &profile, model)? {
                return Ok(plan);
            }
        }
        Err(Error::Infeasible(format!(
            "altitude floor: no control keeps {} m above ground from ({:.1}, {:.1}, {:.1}) within the acceleration limits",
            self.config.h_min, state.x, state.y, state.z
        )))
    }

    fn plan_with(
        &self,
        state: &UavState,
        terrain: &TerrainGrid,
        profile: &TerrainProfile,
        model: FloorModel,
    ) -> Result<Option<MpcPlan>> {
        let h_min = self.config.h_min;
        let mut layers: Vec<Vec<Node>> = Vec::with_capacity(self.config.horizon_steps);
        let mut first = Vec::new();
        for b in 0..self.lattice.len() {
            if !self.reachable(state.v_h, state.v_z, b) {
                continue;
            }
            // Same arithmetic as the executed kinematic steps.
            let (mut d, mut z) = (0.0, state.z);
            let mut ok = true;
            let mut floor_err = None;
            self.ramp(state.v_h, state.v_z, b, |vh, vz, dt| {
                d += vh * dt;
                z += vz * dt;
                if !ok {
                    return;
                }
                let ground = match model {
                    FloorModel::AnyHeading => match terrain.max_elevation_within(state.xy(), d + REACH_MARGIN) {
                        Ok(g) => g,
                        Err(e) => {
                            floor_err = Some(e);
                            ok = false;
                            return;
                        }
                    },
                    FloorModel::Heading => profile.elevation(d),
                };
                ok = z >= ground + h_min;
            });
            if let Some(e) = floor_err {
                return Err(e);
            }
            if !ok {
                continue;
            }
            let ground = profile.elevation(d);
            let (v_h, _) = self.lattice[b];
            let cost = self.step_cost(v_h, z, ground);
            first.push(Node {
                vel: b,
                distance: d,
                z,
                cost,
                parent: usize::MAX,
            });
        }
        let mut beam = Beam::new(self, self.lattice.len());
        first.into_iter().for_each(|n| beam.offer(n));
        layers.push(beam.into_nodes());
        for _ in 1..self.config.horizon_steps {
            let prev = layers.last().expect("first layer");
            let mut next = Beam::new(self, self.lattice.len());
            for (pi, node) in prev.iter().enumerate() {
                'targets: for tr in &self.transitions[node.vel] {
                    for &(dd, dz) in &tr.offsets {
                        if node.z + dz < profile.elevation(node.distance + dd) + h_min {
                            continue 'targets;
                        }
                    }
                    let &(dd, dz) = tr.offsets.last().expect("at least one sub-step");
                    let distance = node.distance + dd;
                    let z = node.z + dz;
                    let ground = profile.elevation(distance);
                    let step_cost = self.step_cost(self.lattice[tr.to].0, z, ground);
                    next.offer(Node {
                        vel: tr.to,
                        distance,
                        z,
                        cost: node.cost + step_cost,
                        parent: pi,
                    });
                }
            }
            layers.push(next.into_nodes());
        }
        let last = layers.last().expect("horizon has steps");
        let Some(best) = (0..last.len()).min_by(|&a, &b| last[a].cost.total_cmp(&last[b].cost)) else {
            return Ok(None);
        };
        let total_cost = last[best].cost;
        let mut steps = Vec::with_capacity(layers.len());
        let mut idx = best;
        for (i, layer) in layers.iter().enumerate().rev() {
            let node = &layer[idx];
            let before = if i == 0 { 0.0 } else { layers[i - 1][node.parent].cost };
            let ground = profile.elevation(node.distance);
            steps.push(self.planned(node.vel, node.distance, node.z, ground, node.cost - before));
            idx = node.parent;
        }
        steps.reverse();
        Ok(Some(MpcPlan {
            steps,
            total_cost,
            floor_model: model,
        }))
    }

    fn planned(&self, b: usize, distance: f64, z: f64, ground: f64, cost: f64) -> PlannedStep {
        let (target_v_h, target_v_z) = self.lattice[b];
        PlannedStep {
            target_v_h,
            target_v_z,
            distance,
            z,
            ground,
            cost,
        }
    }

    fn merge_key(&self, node: &Node) -> Option<(i64, i64)> {
        let (bd, bz) = (self.config.merge_distance, self.config.merge_altitude);
        if bd == 0.0 || bz == 0.0 {
            return None;
        }
        Some(((node.distance / bd).floor() as i64, (node.z / bz).floor() as i64))
    }
}

/// Per lattice velocity, the cheapest states with distinct merge keys.
///
/// Offering candidates one at a time yields the same set as merging every
/// candidate by key and then keeping the cheapest `k` per velocity.
struct Beam<'a> {
    planner: &'a Planner,
    k: usize,
    slots: Vec<Vec<(Option<(i64, i64)>, Node)>>,
}

impl<'a> Beam<'a> {
    fn new(planner: &'a Planner, velocities: usize) -> Self {
        Self {
            planner,
            k: planner.config.beam_per_velocity,
            slots: vec![Vec::new(); velocities],
        }
    }

    fn offer(&mut self, node: Node) {
        let key = self.planner.merge_key(&node);
        let slot = &mut self.slots[node.vel];
        if key.is_some() {
            if let Some(entry) = slot.iter_mut().find(|(k, _)| *k == key) {
                if node.cost < entry.1.cost {
                    entry.1 = node;
                }
                return;
            }
        }
        if self.k == 0 || slot.len() < self.k {
            slot.push((key, node));
            return;
        }
        let worst = (0..slot.len())
            .max_by(|&a, &b| slot[a].1.cost.total_cmp(&slot[b].1.cost))
            .expect("full slot");
        if node.cost < slot[worst].1.cost {
            slot[worst] = (key, node);
        }
    }

    fn into_nodes(self) -> Vec<Node> {
        self.slots.into_iter().flatten().map(|(_, n)| n).collect()
    }
}

/// One-shot planning; builds a [`Planner`] for the call.
pub fn mpc_plan(state: &UavState, terrain: &TerrainGrid, limits: &UavLimits, config: &MpcConfig) -> Result<MpcPlan> {
    Planner::new(limits, config)?.plan(state, terrain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;

    fn cruise(z: f64, v_h: f64) -> UavState {
        UavState {
            v_h,
            ..UavState::at_rest(Point3::new(100.0, 500.0, z), 0.0)
        }
    }

    fn flat() -> TerrainGrid {
        TerrainGrid::flat(100, 100, 0.0, 0.0, 10.0, 200.0).unwrap()
    }

    /// Terrain rising by 30 m across one cell at `x = step_x`.
    fn step_terrain(step_x: f64) -> TerrainGrid {
        TerrainGrid::from_fn(100, 100, 0.0, 0.0, 10.0, |x, _| if x < step_x { 200.0 } else { 230.0 }).unwrap()
    }

    fn exact(mut cfg: MpcConfig) -> MpcConfig {
        cfg.merge_distance = 0.0;
        cfg.merge_altitude = 0.0;
        cfg.beam_per_velocity = 0;
        cfg
    }

    /// Every reachable target sequence, simulated sub-step by sub-step.
    fn brute_force(planner: &Planner, state: &UavState, terrain: &TerrainGrid) -> Option<f64> {
        let cfg = planner.config();
        let lim = planner.limits();
        let n_lat = planner.lattice().len();
        let reach = cfg.horizon_duration * lim.v_h_max + 1.0;
        let profile = TerrainProfile::along(terrain, state.xy(), state.heading, reach).unwrap();
        let mut best: Option<f64> = None;
        let total = n_lat.pow(cfg.horizon_steps as u32);
        'seq: for code in 0..total {
            let mut c = code;
            let (mut v_h, mut v_z, mut d, mut z) = (state.v_h, state.v_z, 0.0, state.z);
            let mut cost = 0.0;
            for step in 0..cfg.horizon_steps {
                let (th, tz) = planner.lattice()[c % n_lat];
                c /= n_lat;
                let t = cfg.step_duration();
                if th - v_h > lim.a_h_max * t + 1e-9 || th - v_h < lim.a_h_min * t - 1e-9 || tz - v_z > lim.a_v_max * t + 1e-9 || tz - v_z < lim.a_v_min * t - 1e-9 {
                    continue 'seq;
                }
                for _ in 0..cfg.substeps() {
                    let ctl = ramp_control(v_h, v_z, th, tz, 0.0, lim, cfg.integration_step);
                    v_h = ctl.v_h();
                    v_z = ctl.v_z();
                    d += v_h * cfg.integration_step;
                    z += v_z * cfg.integration_step;
                    let ground = if step == 0 {
                        terrain.max_elevation_within(state.xy(), d).unwrap()
                    } else {
                        profile.elevation(d)
                    };
                    if z < ground + cfg.h_min - 1e-9 {
                        continue 'seq;
                    }
                }
                let e = z - profile.elevation(d) - cfg.h_goal;
                cost += -cfg.w_v * v_h + cfg.w_h * e * e;
            }
            best = Some(best.map_or(cost, |b: f64| b.min(cost)));
        }
        best
    }

    #[test]
    fn lattice_respects_bounds_and_is_unique() {
        let lim = UavLimits::m210();
        let lat = velocity_lattice(&lim, 11, 11);
        assert!(lat.contains(&(10.0, 0.0)) && lat.contains(&(0.0, 0.0)));
        for (i, a) in lat.iter().enumerate() {
            assert!(a.0 >= 0.0 && a.0 <= 10.0 && a.1 >= -3.0 && a.1 <= 5.0);
            assert!(lat[i + 1..].iter().all(|b| b != a));
        }
    }

    #[test]
    fn dynamic_programme_matches_enumeration() {
        let cfg = exact(MpcConfig {
            horizon_steps: 4,
            horizon_duration: 12.0,
            rho_levels: 4,
            phi_levels: 5,
            h_goal: 50.0,
            ..MpcConfig::default()
        });
        let lim = UavLimits::m210();
        let planner = Planner::new(&lim, &cfg).unwrap();
        assert_eq!(planner.lattice().len(), 8);
        let ridge = TerrainGrid::from_fn(100, 100, 0.0, 0.0, 10.0, |x, y| 200.0 + 12.0 * ((x - 100.0) / 40.0).sin().max(0.0) + 0.01 * y).unwrap();
        let cases = [
            (flat(), cruise(255.0, 10.0)),
            (flat(), cruise(240.0, 3.0)),
            (step_terrain(160.0), cruise(236.0, 6.0)),
            (ridge.clone(), cruise(250.0, 8.0)),
            (ridge, UavState { v_z: -2.0, ..cruise(262.0, 4.0) }),
        ];
        for (terrain, state) in cases {
            let plan = planner.plan(&state, &terrain).unwrap();
            let oracle = brute_force(&planner, &state, &terrain).expect("feasible case");
            assert!((plan.total_cost - oracle).abs() < 1e-9, "dp {} vs oracle {oracle}", plan.total_cost);
            let sum: f64 = plan.steps.iter().map(|s| s.cost).sum();
            assert!((sum - plan.total_cost).abs() < 1e-9);
        }
    }

    #[test]
    fn flat_cruise_holds_full_speed() {
        let lim = UavLimits::m210();
        let plan = mpc_plan(&cruise(255.0, 10.0), &flat(), &lim, &MpcConfig::default()).unwrap();
        for s in &plan.steps {
            assert_eq!((s.target_v_h, s.target_v_z), (10.0, 0.0));
            assert!((s.z - 255.0).abs() < 1e-12);
        }
    }

    #[test]
    fn climbs_before_terrain_step() {
        let lim = UavLimits::m210();
        let cfg = MpcConfig::default();
        let state = cruise(235.0, 10.0);
        let terrain = step_terrain(200.0);
        let plan = mpc_plan(&state, &terrain, &lim, &cfg).unwrap();
        assert!(plan.steps[0].target_v_z > 0.0, "{:?}", plan.steps[0]);
        assert!(plan.steps.iter().any(|s| s.target_v_h < 10.0));
        // Replay the targets and check the floor at every sub-step.
        let (mut v_h, mut v_z, mut x, mut z) = (state.v_h, state.v_z, state.x, state.z);
        for s in &plan.steps {
            for _ in 0..cfg.substeps() {
                let c = ramp_control(v_h, v_z, s.target_v_h, s.target_v_z, 0.0, &lim, cfg.integration_step);
                v_h = c.v_h();
                v_z = c.v_z();
                x += v_h * cfg.integration_step;
                z += v_z * cfg.integration_step;
                assert!(z >= terrain.elevation_at(x, 500.0).unwrap() + cfg.h_min - 1e-3, "x {x} z {z}");
            }
        }
        assert!(x > 215.0, "the plan should cross the step, reached x = {x}");
    }

    #[test]
    fn settles_at_floor_when_goal_equals_floor() {
        let lim = UavLimits::m210();
        let cfg = MpcConfig {
            h_goal: 35.0,
            ..MpcConfig::default()
        };
        let planner = Planner::new(&lim, &cfg).unwrap();
        let terrain = flat();
        let mut state = cruise(260.0, 10.0);
        let quantum = 10.0 / (cfg.rho_levels - 1) as f64 * cfg.step_duration();
        let mut heights = Vec::new();
        for _ in 0..20 {
            let plan = planner.plan(&state, &terrain).unwrap();
            let (th, tz) = plan.first_target();
            for _ in 0..cfg.substeps() {
                let c = ramp_control(state.v_h, state.v_z, th, tz, 0.0, &lim, cfg.integration_step);
                state = crate::uav_control::kinematic_step(&state, &c, &lim, cfg.integration_step).unwrap();
                assert!(state.z >= 200.0 + 35.0);
            }
            // Re-centre so the path never leaves the terrain.
            state.x = 100.0;
            heights.push(state.z - 200.0);
        }
        let tail = &heights[10..];
        let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &h| (a.min(h), b.max(h)));
        assert!(lo >= 35.0 && hi <= 35.0 + quantum, "{heights:?}");
        assert!(hi - lo <= quantum);
    }

    #[test]
    fn wall_ahead_is_infeasible() {
        let lim = UavLimits::m210();
        let cfg = MpcConfig::default();
        let terrain = TerrainGrid::from_fn(100, 100, 0.0, 0.0, 10.0, |x, _| if x < 105.0 { 200.0 } else { 500.0 }).unwrap();
        match mpc_plan(&cruise(236.0, 10.0), &terrain, &lim, &cfg) {
            Err(Error::Infeasible(msg)) => assert!(msg.contains("altitude floor")),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }
}
