//! Coverage, undetected-target density and the HEDAC potential field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point2;
use crate::poisson::{pcg, Multigrid, SolveStats, StencilOperator};
use crate::search_domain::{DensityGrid, GridSpec};
use crate::sensing::{CameraPose, SensorContext};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HedacParams {
    /// Diffusion coefficient, m².
    pub alpha: f64,
    /// Sink coefficient.
    pub beta: f64,
    /// Relative residual target of the potential solve.
    #[serde(default = "default_tolerance")]
    pub solver_tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_tolerance() -> f64 {
    1e-8
}

fn default_max_iterations() -> usize {
    500
}

impl Default for HedacParams {
    fn default() -> Self {
        Self {
            alpha: 1000.0,
            beta: 1.0,
            solver_tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
        }
    }
}

impl HedacParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) || !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("HEDAC alpha and beta must be positive"));
        }
        if !(self.solver_tolerance > 0.0 && self.solver_tolerance < 1.0) {
            return Err(Error::invalid("solver_tolerance must be in (0, 1)"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be positive"));
        }
        Ok(())
    }
}

/// Search fields over the flight domain.
///
/// Coverage `c` only grows; the undetected density is kept as
/// `m = m0 * exp(-c)` after every update.
#[derive(Debug, Clone)]
pub struct FieldState {
    spec: GridSpec,
    m0: DensityGrid,
    c: Vec<f64>,
    m: Vec<f64>,
    u: Vec<f64>,
    solver: Option<(HedacParams, Multigrid)>,
}

impl FieldState {
    pub fn new(m0: DensityGrid) -> Self {
        let spec = m0.spec;
        let n = spec.len();
        Self {
            spec,
            c: vec![0.0; n],
            m: m0.values.clone(),
            u: vec![0.0; n],
            m0,
            solver: None,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn m0(&self) -> &DensityGrid {
        &self.m0
    }
    pub fn coverage(&self) -> &[f64] {
        &self.c
    }
    pub fn density(&self) -> &[f64] {
        &self.m
    }
    pub fn potential(&self) -> &[f64] {
        &self.u
    }

    /// Replaces the potential, e.g. with an analytic field.
    pub fn set_potential(&mut self, u: Vec<f64>) -> Result<()> {
        if u.len() != self.spec.len() {
            return Err(Error::invalid("potential length does not match the grid"));
        }
        self.u = u;
        Ok(())
    }

    /// Adds `dc` to the coverage of cell `idx` and refreshes its density.
    pub fn add_coverage(&mut self, idx: usize, dc: f64) {
        debug_assert!(dc >= 0.0);
        self.c[idx] += dc;
        self.m[idx] = self.m0.values[idx] * (-self.c[idx]).exp();
    }

    /// Integrates the detection rate of one camera pose over `dt` seconds
    /// (rectangle rule) into the coverage of every cell centre.
    pub fn accumulate_coverage(&mut self, pose: &CameraPose, sensor: &SensorContext<'_>, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("coverage time step must be positive, got {dt}")));
        }
        let radius = sensor.footprint_radius(pose);
        if radius <= 0.0 || sensor.params.rate_scale == 0.0 {
            return Ok(());
        }
        let spec = self.spec;
        let px = pose.position.x;
        let py = pose.position.y;
        let col_range = index_range(px - radius, px + radius, spec.x_origin, spec.cell_size, spec.ncols);
        let row_range = index_range(py - radius, py + radius, spec.y_origin, spec.cell_size, spec.nrows);
        let (Some((c0, c1)), Some((r0, r1))) = (col_range, row_range) else {
            return Ok(());
        };
        for row in r0..=r1 {
            for col in c0..=c1 {
                let p = spec.center(col, row);
                if (p.x - px).hypot(p.y - py) > radius {
                    continue;
                }
                let psi = sensor.rate(pose, p)?;
                if psi > 0.0 {
                    self.add_coverage(spec.index(col, row), psi * dt);
                }
            }
        }
        Ok(())
    }

    /// Search accomplishment: the probability mass already detected.
    ///
    /// Summed as `m0 * (1 - exp(-c))` per cell, which equals
    /// `1 - sum(m) * cell_area` for a normalized `m0` but stays exactly zero
    /// before any coverage and never decreases as coverage grows.
    pub fn accomplishment(&self) -> f64 {
        let area = self.spec.cell_area();
        let s: f64 = self
            .m0
            .values
            .iter()
            .zip(&self.c)
            .map(|(m0, c)| m0 * -(-c).exp_m1())
            .sum();
        (s * area).clamp(0.0, 1.0)
    }

    /// Re-solves `alpha * Lap(u) = beta * u - m` with zero normal flux,
    /// starting from the current potential.
    pub fn solve_potential(&mut self, hedac: &HedacParams) -> Result<SolveStats> {
        self.solve_potential_masked(hedac, None)
    }

    /// As [`solve_potential`](Self::solve_potential), with the source `m`
    /// zeroed outside the cells where `mask` is set.
    pub fn solve_potential_masked(&mut self, hedac: &HedacParams, mask: Option<&[bool]>) -> Result<SolveStats> {
        hedac.validate()?;
        let rebuild = !matches!(&self.solver, Some((p, _)) if p.alpha == hedac.alpha && p.beta == hedac.beta);
        if rebuild {
            let op = StencilOperator::screened_poisson(
                self.spec.ncols,
                self.spec.nrows,
                self.spec.cell_size,
                hedac.alpha,
                hedac.beta,
            );
            self.solver = Some((*hedac, Multigrid::new(op)?));
        }
        let (_, mg) = self.solver.as_mut().expect("solver built above");
        match mask {
            None => pcg(mg, &self.m, &mut self.u, hedac.solver_tolerance, hedac.max_iterations),
            Some(mask) => {
                if mask.len() != self.m.len() {
                    return Err(Error::invalid("source mask length does not match the grid"));
                }
                let source: Vec<f64> = self.m.iter().zip(mask).map(|(m, &keep)| if keep { *m } else { 0.0 }).collect();
                pcg(mg, &source, &mut self.u, hedac.solver_tolerance, hedac.max_iterations)
            }
        }
    }

    /// Central-difference gradient of `u` at cell centre `(col, row)`.
    /// Ghost cells mirror the boundary cell, so the normal component vanishes there.
    pub fn node_gradient(&self, col: usize, row: usize) -> Point2 {
        let spec = &self.spec;
        let u = |c: usize, r: usize| self.u[spec.index(c, r)];
        let left = u(col.saturating_sub(1), row);
        let right = u((col + 1).min(spec.ncols - 1), row);
        let down = u(col, row.saturating_sub(1));
        let up = u(col, (row + 1).min(spec.nrows - 1));
        let h2 = 2.0 * spec.cell_size;
        Point2::new((right - left) / h2, (up - down) / h2)
    }

    /// Unit direction of steepest potential ascent at `position`, or `None`
    /// where the field is flat.
    pub fn steering_gradient(&self, position: Point2) -> Result<Option<Point2>> {
        let spec = &self.spec;
        if !spec.contains(position) || !position.x.is_finite() || !position.y.is_finite() {
            return Err(Error::OutOfExtent {
                what: "flight domain",
                x: position.x,
                y: position.y,
            });
        }
        let fx = ((position.x - spec.x_origin) / spec.cell_size - 0.5).clamp(0.0, (spec.ncols - 1) as f64);
        let fy = ((position.y - spec.y_origin) / spec.cell_size - 0.5).clamp(0.0, (spec.nrows - 1) as f64);
        let c0 = (fx.floor() as usize).min(spec.ncols.saturating_sub(2));
        let r0 = (fy.floor() as usize).min(spec.nrows.saturating_sub(2));
        let c1 = (c0 + 1).min(spec.ncols - 1);
        let r1 = (r0 + 1).min(spec.nrows - 1);
        let tx = (fx - c0 as f64).clamp(0.0, 1.0);
        let ty = (fy - r0 as f64).clamp(0.0, 1.0);
        let g00 = self.node_gradient(c0, r0);
        let g10 = self.node_gradient(c1, r0);
        let g01 = self.node_gradient(c0, r1);
        let g11 = self.node_gradient(c1, r1);
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let gx = lerp(lerp(g00.x, g10.x, tx), lerp(g01.x, g11.x, tx), ty);
        let gy = lerp(lerp(g00.y, g10.y, tx), lerp(g01.y, g11.y, tx), ty);
        let norm = gx.hypot(gy);
        if norm < 1e-12 || !norm.is_finite() {
            return Ok(None);
        }
        Ok(Some(Point2::new(gx / norm, gy / norm)))
    }
}

/// Inclusive range of cell indices whose centres may fall in `[lo, hi]`.
fn index_range(lo: f64, hi: f64, origin: f64, cell: f64, n: usize) -> Option<(usize, usize)> {
    let a = ((lo - origin) / cell - 0.5).ceil();
    let b = ((hi - origin) / cell - 0.5).floor();
    if b < 0.0 || a > (n - 1) as f64 || a > b {
        return None;
    }
    Some((a.max(0.0) as usize, (b as usize).min(n - 1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_state(nx: usize, ny: usize, h: f64) -> FieldState {
        let spec = GridSpec::new(0.0, 0.0, h, nx, ny).unwrap();
        let v = 1.0 / (spec.len() as f64 * spec.cell_area());
        FieldState::new(DensityGrid {
            spec,
            values: vec![v; spec.len()],
        })
    }

    #[test]
    fn accomplishment_fixed_points() {
        let mut s = uniform_state(8, 6, 10.0);
        assert_eq!(s.accomplishment(), 0.0);
        for i in 0..s.spec().len() {
            s.add_coverage(i, std::f64::consts::LN_2);
        }
        assert!((s.accomplishment() - 0.5).abs() < 1e-12);
        for i in 0..s.spec().len() {
            s.add_coverage(i, 40.0);
        }
        assert!((s.accomplishment() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_density_potential() {
        let mut s = uniform_state(17, 11, 10.0);
        let hedac = HedacParams {
            beta: 2.0,
            solver_tolerance: 1e-12,
            ..HedacParams::default()
        };
        s.solve_potential(&hedac).unwrap();
        let mu = s.m0().values[0];
        assert!(s.potential().iter().all(|u| ((u - mu / 2.0) / mu).abs() < 1e-10));
        assert_eq!(s.steering_gradient(Point2::new(50.0, 50.0)).unwrap(), None);
    }

    #[test]
    fn planar_ramp_points_east() {
        let mut s = uniform_state(10, 10, 1.0);
        let ramp = (0..100).map(|k| (k % 10) as f64 + 0.5).collect();
        s.set_potential(ramp).unwrap();
        for (x, y) in [(2.5, 3.5), (5.0, 5.0), (7.2, 1.9)] {
            let d = s.steering_gradient(Point2::new(x, y)).unwrap().unwrap();
            assert!((d.x - 1.0).abs() < 1e-12 && d.y.abs() < 1e-12);
        }
        assert!(s.steering_gradient(Point2::new(10.5, 5.0)).is_err());
    }

    #[test]
    fn index_range_clips() {
        assert_eq!(index_range(-5.0, 25.0, 0.0, 10.0, 10), Some((0, 2)));
        assert_eq!(index_range(-5.0, 24.9, 0.0, 10.0, 10), Some((0, 1)));
        assert_eq!(index_range(200.0, 300.0, 0.0, 10.0, 10), None);
        assert_eq!(index_range(11.0, 14.0, 0.0, 10.0, 10), None);
    }
}
