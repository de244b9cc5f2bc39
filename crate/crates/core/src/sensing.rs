//! Camera geometry, ground sampling distance and the instantaneous detection rate.
//!
//! The camera is nadir-fixed. In the camera-local frame `x` points along the
//! UAV heading, `y` to its left and `z` up, so ground points have `z < 0`.
//! The wide field of view spans the local `x` axis.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point2, Point3};
use crate::terrain::TerrainGrid;

/// Which of the two tabulated FOV angles spans the image width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FovAssignment {
    /// `fov_c2` is horizontal (across `x_image`), `fov_c1` vertical.
    #[default]
    C2Horizontal,
    C1Horizontal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub name: String,
    /// Degrees.
    pub fov_c1: f64,
    /// Degrees.
    pub fov_c2: f64,
    /// Pixels across the wide image side.
    pub x_image: u32,
    pub y_image: u32,
    #[serde(default)]
    pub fov_assignment: FovAssignment,
}

impl CameraModel {
    pub fn new(name: impl Into<String>, fov_c1: f64, fov_c2: f64, x_image: u32, y_image: u32) -> Result<Self> {
        let cam = Self {
            name: name.into(),
            fov_c1,
            fov_c2,
            x_image,
            y_image,
            fov_assignment: FovAssignment::default(),
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        for (label, a) in [("fov_c1", self.fov_c1), ("fov_c2", self.fov_c2)] {
            if !(a > 0.0 && a < 180.0) {
                return Err(Error::invalid(format!("camera `{}`: {label} must be in (0, 180), got {a}", self.name)));
            }
        }
        if self.x_image == 0 || self.y_image == 0 {
            return Err(Error::invalid(format!("camera `{}`: resolution must be positive", self.name)));
        }
        Ok(())
    }

    /// Zenmuse X5S.
    pub fn x5s() -> Self {
        Self::new("X5S", 39.2, 64.7, 5280, 2970).expect("valid preset")
    }

    /// Zenmuse Z30.
    pub fn z30() -> Self {
        Self::new("Z30", 33.9, 56.9, 1920, 1080).expect("valid preset")
    }

    /// Mavic 2 Enterprise Dual built-in visual camera.
    pub fn mavic2ed() -> Self {
        Self::new("Mavic2ED", 57.58, 72.5, 4056, 3040).expect("valid preset")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "X5S" => Some(Self::x5s()),
            "Z30" => Some(Self::z30()),
            "Mavic2ED" => Some(Self::mavic2ed()),
            _ => None,
        }
    }

    pub const PRESETS: [&'static str; 3] = ["X5S", "Z30", "Mavic2ED"];

    /// Horizontal field of view in degrees.
    pub fn h_fov(&self) -> f64 {
        match self.fov_assignment {
            FovAssignment::C2Horizontal => self.fov_c2,
            FovAssignment::C1Horizontal => self.fov_c1,
        }
    }

    /// Vertical field of view in degrees.
    pub fn v_fov(&self) -> f64 {
        match self.fov_assignment {
            FovAssignment::C2Horizontal => self.fov_c1,
            FovAssignment::C1Horizontal => self.fov_c2,
        }
    }

    fn half_tans(&self) -> (f64, f64) {
        (
            (0.5 * self.h_fov().to_radians()).tan(),
            (0.5 * self.v_fov().to_radians()).tan(),
        )
    }
}

/// Horizontal and vertical ground sampling distance, cm/px.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gsd {
    pub horizontal: f64,
    pub vertical: f64,
}

/// Ground sampling distance at relative height `h` metres.
pub fn gsd(camera: &CameraModel, h: f64) -> Result<Gsd> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("GSD needs a positive height, got {h}")));
    }
    let (th, tv) = camera.half_tans();
    Ok(Gsd {
        horizontal: 100.0 * 2.0 * h * th / camera.x_image as f64,
        vertical: 100.0 * 2.0 * h * tv / camera.y_image as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallBin {
    pub gsd_low: f64,
    pub gsd_high: f64,
    pub recall: f64,
}

/// Detector recall per GSD interval. Intervals are half-open `[low, high)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecallTable {
    bins: Vec<RecallBin>,
}

const BUILTIN_TABLE: &str = include_str!("../assets/recall_table.txt");

impl RecallTable {
    pub fn new(bins: Vec<RecallBin>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::invalid("recall table has no bins"));
        }
        for (i, b) in bins.iter().enumerate() {
            if !(b.gsd_low.is_finite() && b.gsd_high.is_finite() && b.gsd_low >= 0.0 && b.gsd_low < b.gsd_high) {
                return Err(Error::invalid(format!("recall bin {i} has an invalid range")));
            }
            if !(0.0..=1.0).contains(&b.recall) {
                return Err(Error::invalid(format!("recall bin {i}: recall {} not in [0, 1]", b.recall)));
            }
            if i > 0 && (b.gsd_low - bins[i - 1].gsd_high).abs() > 1e-9 {
                return Err(Error::invalid(format!("recall bin {i} does not start where bin {} ends", i - 1)));
            }
        }
        Ok(Self { bins })
    }

    /// The shipped calibration table (twelve 0.5 cm/px bins from 0.5 to 6.5).
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_TABLE).expect("shipped recall table is valid")
    }

    pub fn bins(&self) -> &[RecallBin] {
        &self.bins
    }

    pub fn bin_width(&self) -> f64 {
        self.bins[0].gsd_high - self.bins[0].gsd_low
    }

    /// Parses `gsd_low gsd_high recall` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut bins = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse {
                what: "recall table",
                line: i + 1,
                msg,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(perr(format!("expected 3 columns, got {}", fields.len())));
            }
            let mut nums = [0.0; 3];
            for (slot, tok) in nums.iter_mut().zip(&fields) {
                *slot = tok.parse().map_err(|_| perr(format!("`{tok}` is not a number")))?;
            }
            bins.push(RecallBin {
                gsd_low: nums[0],
                gsd_high: nums[1],
                recall: nums[2],
            });
        }
        Self::new(bins)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Canonical text form; parsing it back gives the same table.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# gsd_low_cm_px gsd_high_cm_px recall\n");
        for b in &self.bins {
            let _ = writeln!(out, "{:?} {:?} {:?}", b.gsd_low, b.gsd_high, b.recall);
        }
        out
    }

    /// Recall of the bin containing `gsd`. Values below the first bin take
    /// its recall; values at or above the last bin's upper edge give 0.
    pub fn recall_lookup(&self, gsd: f64) -> f64 {
        let first = &self.bins[0];
        if gsd < first.gsd_low {
            return first.recall;
        }
        // Bins are sorted; find the last bin whose lower edge is <= gsd.
        let k = self.bins.partition_point(|b| b.gsd_low <= gsd);
        let bin = &self.bins[k - 1];
        if gsd < bin.gsd_high {
            bin.recall
        } else {
            0.0
        }
    }
}

/// Parameters of the in-frustum detection-rate model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensingParams {
    /// Peak detection rate, 1/s.
    pub rate_scale: f64,
    /// Exponent of the off-nadir cosine falloff.
    pub falloff_exponent: f64,
}

impl Default for SensingParams {
    fn default() -> Self {
        Self {
            rate_scale: 0.05,
            falloff_exponent: 2.0,
        }
    }
}

impl SensingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_scale >= 0.0 && self.rate_scale.is_finite()) {
            return Err(Error::invalid(format!("rate_scale must be non-negative, got {}", self.rate_scale)));
        }
        if !(self.falloff_exponent >= 0.0 && self.falloff_exponent.is_finite()) {
            return Err(Error::invalid("falloff_exponent must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position: Point3,
    /// Radians, counter-clockwise from +x (east).
    pub yaw: f64,
}

/// Position of ground point `p` in the camera-local frame.
pub fn to_camera_frame(pose: &CameraPose, p: Point2, terrain: &TerrainGrid) -> Result<Point3> {
    let ground = terrain.elevation_at(p.x, p.y)?;
    Ok(camera_local(pose, p, ground))
}

fn camera_local(pose: &CameraPose, p: Point2, ground: f64) -> Point3 {
    let dx = p.x - pose.position.x;
    let dy = p.y - pose.position.y;
    let (s, c) = pose.yaw.sin_cos();
    Point3::new(c * dx + s * dy, -s * dx + c * dy, ground - pose.position.z)
}

/// Rectangular nadir frustum test. Points at or above the camera are outside.
pub fn in_fov(camera: &CameraModel, r: Point3) -> bool {
    if !(r.z < 0.0) {
        return false;
    }
    let (th, tv) = camera.half_tans();
    let depth = -r.z;
    r.x.abs() <= depth * th && r.y.abs() <= depth * tv
}

/// Everything needed to evaluate the detection rate; immutable and shareable.
#[derive(Debug, Clone, Copy)]
pub struct SensorContext<'a> {
    pub camera: &'a CameraModel,
    pub terrain: &'a TerrainGrid,
    pub table: &'a RecallTable,
    pub params: SensingParams,
    min_ground: f64,
}

impl<'a> SensorContext<'a> {
    pub fn new(camera: &'a CameraModel, terrain: &'a TerrainGrid, table: &'a RecallTable, params: SensingParams) -> Self {
        Self {
            camera,
            terrain,
            table,
            params,
            min_ground: terrain.min_elevation(),
        }
    }

    /// Detection rate at ground point `p`, 1/s.
    pub fn rate(&self, pose: &CameraPose, p: Point2) -> Result<f64> {
        detection_rate(pose, p, self.camera, self.terrain, self.table, &self.params)
    }

    /// Horizontal radius around the camera outside which no ground point can
    /// be in view, whatever the yaw.
    ///
    /// Starts from the lowest ground of the whole grid and shrinks the radius
    /// with the lowest ground inside the previous one.
    pub fn footprint_radius(&self, pose: &CameraPose) -> f64 {
        let (th, tv) = self.camera.half_tans();
        let spread = th.hypot(tv);
        let z = pose.position.z;
        let mut radius = (z - self.min_ground).max(0.0) * spread;
        for _ in 0..3 {
            let Ok(low) = self.terrain.min_elevation_within(pose.position.xy(), radius) else {
                break;
            };
            let next = (z - low).max(0.0) * spread;
            if next >= radius {
                break;
            }
            radius = next;
        }
        radius
    }
}

/// Instantaneous detection rate ψ at ground point `p`, 1/s.
///
/// Zero outside the frustum or when terrain blocks the view; otherwise
/// `rate_scale * recall(gsd(h)) * cos(theta)^k` with `h` the camera height
/// above `p` and `theta` the off-nadir angle.
pub fn detection_rate(
    pose: &CameraPose,
    p: Point2,
    camera: &CameraModel,
    terrain: &TerrainGrid,
    table: &RecallTable,
    params: &SensingParams,
) -> Result<f64> {
    if params.rate_scale == 0.0 {
        return Ok(0.0);
    }
    let ground = terrain.elevation_at(p.x, p.y)?;
    let r = camera_local(pose, p, ground);
    if !in_fov(camera, r) {
        return Ok(0.0);
    }
    if !terrain.visible(pose.position, Point3::new(p.x, p.y, ground))? {
        return Ok(0.0);
    }
    let h = -r.z;
    let recall = table.recall_lookup(gsd(camera, h)?.horizontal);
    let cos_theta = h / r.norm();
    Ok(params.rate_scale * recall * cos_theta.powf(params.falloff_exponent))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x5s_gsd_at_55m() {
        let g = gsd(&CameraModel::x5s(), 55.0).unwrap();
        assert!((g.horizontal - 1.319).abs() < 1e-3, "{}", g.horizontal);
        assert!((g.vertical - g.horizontal).abs() < 1e-3);
    }

    #[test]
    fn gsd_is_linear_in_height() {
        let cam = CameraModel::z30();
        let a = gsd(&cam, 40.0).unwrap();
        let b = gsd(&cam, 80.0).unwrap();
        assert_eq!(b.horizontal, 2.0 * a.horizontal);
        assert!(gsd(&cam, 0.0).is_err());
        assert!(gsd(&cam, -3.0).is_err());
    }

    #[test]
    fn symmetric_camera_has_equal_gsd() {
        let cam = CameraModel::new("sq", 50.0, 50.0, 1000, 1000).unwrap();
        let g = gsd(&cam, 60.0).unwrap();
        assert_eq!(g.horizontal, g.vertical);
    }

    #[test]
    fn recall_examples() {
        let t = RecallTable::builtin();
        assert_eq!(t.recall_lookup(1.2), 0.977);
        assert_eq!(t.recall_lookup(6.2), 0.142);
        assert_eq!(t.recall_lookup(9.0), 0.0);
        assert_eq!(t.recall_lookup(6.5), 0.0);
        assert_eq!(t.recall_lookup(0.1), 0.95);
        assert_eq!(t.recall_lookup(1.5), 0.956);
        assert_eq!(t.bin_width(), 0.5);
    }

    #[test]
    fn table_round_trip_is_byte_identical() {
        let text = include_str!("../assets/recall_table.txt");
        assert_eq!(RecallTable::parse(text).unwrap().to_text(), text);
    }

    #[test]
    fn bad_tables_rejected() {
        assert!(RecallTable::parse("").is_err());
        assert!(RecallTable::parse("0.5 1.0 1.2\n").is_err());
        assert!(RecallTable::parse("0.5 1.0 0.9\n1.5 2.0 0.9\n").is_err());
        assert!(RecallTable::parse("0.5 1.0\n").is_err());
        assert!(RecallTable::parse("1.0 0.5 0.3\n").is_err());
    }

    #[test]
    fn camera_frame_conventions() {
        let terrain = TerrainGrid::flat(10, 10, 0.0, 0.0, 10.0, 0.0).unwrap();
        let pose = CameraPose {
            position: Point3::new(50.0, 50.0, 55.0),
            yaw: 0.0,
        };
        let below = to_camera_frame(&pose, Point2::new(50.0, 50.0), &terrain).unwrap();
        assert_eq!(below, Point3::new(0.0, 0.0, -55.0));
        let east = to_camera_frame(&pose, Point2::new(60.0, 50.0), &terrain).unwrap();
        assert_eq!(east, Point3::new(10.0, 0.0, -55.0));
        let north_facing = CameraPose {
            yaw: std::f64::consts::FRAC_PI_2,
            ..pose
        };
        let r = to_camera_frame(&north_facing, Point2::new(60.0, 50.0), &terrain).unwrap();
        assert!(r.x.abs() < 1e-12 && (r.y + 10.0).abs() < 1e-12 && r.z == -55.0);
    }

    #[test]
    fn frustum_faces() {
        let cam = CameraModel::x5s();
        assert!(in_fov(&cam, Point3::new(0.0, 0.0, -55.0)));
        let th = (0.5 * cam.h_fov().to_radians()).tan();
        assert!(!in_fov(&cam, Point3::new(55.0 * th * 1.01, 0.0, -55.0)));
        assert!(in_fov(&cam, Point3::new(55.0 * th * 0.99, 0.0, -55.0)));
        assert!(!in_fov(&cam, Point3::new(0.0, 0.0, 0.0)));
        assert!(!in_fov(&cam, Point3::new(0.0, 0.0, 5.0)));
    }

    #[test]
    fn nadir_detection_rate() {
        let terrain = TerrainGrid::flat(20, 20, 0.0, 0.0, 10.0, 100.0).unwrap();
        let pose = CameraPose {
            position: Point3::new(100.0, 100.0, 155.0),
            yaw: 0.3,
        };
        let psi = detection_rate(
            &pose,
            Point2::new(100.0, 100.0),
            &CameraModel::x5s(),
            &terrain,
            &RecallTable::builtin(),
            &SensingParams::default(),
        )
        .unwrap();
        assert!((psi - 0.04885).abs() < 1e-12, "{psi}");
        let far = detection_rate(
            &pose,
            Point2::new(190.0, 100.0),
            &CameraModel::x5s(),
            &terrain,
            &RecallTable::builtin(),
            &SensingParams::default(),
        )
        .unwrap();
        assert_eq!(far, 0.0);
    }

    #[test]
    fn flipped_fov_assignment() {
        let mut cam = CameraModel::x5s();
        cam.fov_assignment = FovAssignment::C1Horizontal;
        assert_eq!(cam.h_fov(), 39.2);
        assert_eq!(cam.v_fov(), 64.7);
    }
}
