//! UAV kinematics, heading steering and flight envelope checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{wrap_angle, Point2, Point3};

/// Slack allowed on every envelope check, absorbing rounding in `rho, phi <-> v_h, v_z`.
pub const LIMIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub x: f64,
    pub y: f64,
    /// Absolute altitude, m.
    pub z: f64,
    /// Radians, counter-clockwise from east.
    pub heading: f64,
    pub v_h: f64,
    pub v_z: f64,
    pub t: f64,
}

impl UavState {
    pub fn at_rest(position: Point3, heading: f64) -> Self {
        Self {
            x: position.x,
            y: position.y,
            z: position.z,
            heading,
            v_h: 0.0,
            v_z: 0.0,
            t: 0.0,
        }
    }

    pub fn position(&self) -> Point3 {
        Point3::new(self.x, self.y, self.z)
    }

    pub fn xy(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.z, self.heading, self.v_h, self.v_z, self.t]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// Velocity intensity, m/s.
    pub rho: f64,
    /// Incline angle above the horizontal plane, radians.
    pub phi: f64,
    /// Yaw rate, rad/s.
    pub omega: f64,
}

impl ControlInput {
    /// Control producing the velocity pair `(v_h, v_z)`, with `v_h >= 0`.
    pub fn from_velocity(v_h: f64, v_z: f64, omega: f64) -> Self {
        Self {
            rho: v_h.hypot(v_z),
            phi: v_z.atan2(v_h),
            omega,
        }
    }

    pub fn v_h(&self) -> f64 {
        self.rho * self.phi.cos()
    }

    pub fn v_z(&self) -> f64 {
        self.rho * self.phi.sin()
    }
}

/// Flight envelope of one airframe. Angles are in degrees as in the datasheet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavLimits {
    pub name: String,
    pub phi_min_deg: f64,
    pub phi_max_deg: f64,
    pub v_h_min: f64,
    pub v_h_max: f64,
    pub v_z_min: f64,
    pub v_z_max: f64,
    pub a_h_min: f64,
    pub a_h_max: f64,
    pub a_v_min: f64,
    pub a_v_max: f64,
    pub omega_max_deg: f64,
}

impl UavLimits {
    pub fn m210() -> Self {
        Self {
            name: "M210".into(),
            phi_min_deg: -90.0,
            phi_max_deg: 90.0,
            v_h_min: 0.0,
            v_h_max: 10.0,
            v_z_min: -3.0,
            v_z_max: 5.0,
            a_h_min: -3.6,
            a_h_max: 2.0,
            a_v_min: -2.0,
            a_v_max: 2.8,
            omega_max_deg: 120.0,
        }
    }

    pub fn mavic2ed() -> Self {
        Self {
            name: "Mavic2ED".into(),
            v_h_max: 8.0,
            v_z_min: -2.0,
            v_z_max: 3.0,
            omega_max_deg: 30.0,
            ..Self::m210()
        }
    }

    pub const PRESETS: [&'static str; 2] = ["M210", "Mavic2ED"];

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "M210" => Some(Self::m210()),
            "Mavic2ED" => Some(Self::mavic2ed()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pairs = [
            ("phi", self.phi_min_deg, self.phi_max_deg),
            ("v_h", self.v_h_min, self.v_h_max),
            ("v_z", self.v_z_min, self.v_z_max),
            ("a_h", self.a_h_min, self.a_h_max),
            ("a_v", self.a_v_min, self.a_v_max),
        ];
        for (what, lo, hi) in pairs {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid(format!("UAV {}: {what} bounds [{lo}, {hi}] are not ordered", self.name)));
            }
        }
        if !(-90.0..=90.0).contains(&self.phi_min_deg) || !(-90.0..=90.0).contains(&self.phi_max_deg) {
            return Err(Error::invalid(format!("UAV {}: incline angles must lie in [-90, 90]", self.name)));
        }
        if self.v_h_min < 0.0 {
            return Err(Error::invalid(format!("UAV {}: v_h_min must be non-negative", self.name)));
        }
        if self.a_h_min > 0.0 || self.a_h_max < 0.0 || self.a_v_min > 0.0 || self.a_v_max < 0.0 {
            return Err(Error::invalid(format!("UAV {}: acceleration bounds must bracket zero", self.name)));
        }
        if !(self.omega_max_deg > 0.0 && self.omega_max_deg.is_finite()) {
            return Err(Error::invalid(format!("UAV {}: omega_max must be positive", self.name)));
        }
        Ok(())
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max_deg.to_radians()
    }

    /// Checks a control against the envelope, given the velocities it replaces
    /// over `dt`. The error names the first violated bound.
    pub fn check(&self, control: &ControlInput, prev_v_h: f64, prev_v_z: f64, dt: f64) -> Result<()> {
        let tol = LIMIT_TOLERANCE;
        let phi_deg = control.phi.to_degrees();
        let v_h = control.v_h();
        let v_z = control.v_z();
        let a_h = (v_h - prev_v_h) / dt;
        let a_v = (v_z - prev_v_z) / dt;
        let checks: [(&'static str, f64, bool); 12] = [
            ("rho_min", control.rho, control.rho >= -tol),
            ("phi_min", phi_deg, phi_deg >= self.phi_min_deg - tol),
            ("phi_max", phi_deg, phi_deg <= self.phi_max_deg + tol),
            ("v_h_min", v_h, v_h >= self.v_h_min - tol),
            ("v_h_max", v_h, v_h <= self.v_h_max + tol),
            ("v_z_min", v_z, v_z >= self.v_z_min - tol),
            ("v_z_max", v_z, v_z <= self.v_z_max + tol),
            ("a_h_min", a_h, a_h >= self.a_h_min - tol),
            ("a_h_max", a_h, a_h <= self.a_h_max + tol),
            ("a_v_min", a_v, a_v >= self.a_v_min - tol),
            ("a_v_max", a_v, a_v <= self.a_v_max + tol),
            ("omega_max", control.omega, control.omega.abs() <= self.omega_max() + tol),
        ];
        for (bound, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::Limit { bound, value });
            }
        }
        Ok(())
    }
}

/// Heading after turning toward `desired` for `dt` seconds at most `omega_max` rad/s.
///
/// Turns the shorter way; an exactly opposite target turns counter-clockwise.
/// Within the cap the result is the desired direction itself.
pub fn steer_heading(heading: f64, desired: Point2, omega_max: f64, dt: f64) -> f64 {
    let target = desired.y.atan2(desired.x);
    let delta = wrap_angle(target - heading);
    let cap = omega_max * dt;
    if delta.abs() <= cap {
        target
    } else {
        wrap_angle(heading + cap.copysign(delta))
    }
}

/// Advances `state` by `dt` under `control`.
///
/// The heading is updated first and the horizontal displacement uses the new
/// heading.
pub fn kinematic_step(state: &UavState, control: &ControlInput, limits: &UavLimits, dt: f64) -> Result<UavState> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    limits.check(control, state.v_h, state.v_z, dt)?;
    let v_h = control.v_h();
    let v_z = control.v_z();
    let heading = wrap_angle(state.heading + control.omega * dt);
    let (s, c) = heading.sin_cos();
    Ok(UavState {
        x: state.x + v_h * c * dt,
        y: state.y + v_h * s * dt,
        z: state.z + v_z * dt,
        heading,
        v_h,
        v_z,
        t: state.t + dt,
    })
}

/// Control moving the velocities toward `(target_v_h, target_v_z)` as fast as
/// the acceleration bounds allow over one step of `dt`.
pub fn ramp_control(
    v_h: f64,
    v_z: f64,
    target_v_h: f64,
    target_v_z: f64,
    omega: f64,
    limits: &UavLimits,
    dt: f64,
) -> ControlInput {
    let next_h = v_h + (target_v_h - v_h).clamp(limits.a_h_min * dt, limits.a_h_max * dt);
    let next_z = v_z + (target_v_z - v_z).clamp(limits.a_v_min * dt, limits.a_v_max * dt);
    let next_h = next_h.clamp(limits.v_h_min, limits.v_h_max);
    let next_z = next_z.clamp(limits.v_z_min, limits.v_z_max);
    ControlInput::from_velocity(next_h.max(0.0), next_z, omega)
}
