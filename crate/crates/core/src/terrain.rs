//! Digital elevation model ingestion and queries.
//!
//! Elevations are read from the plain-text ESRI ASCII grid layout: a short
//! header (`ncols`, `nrows`, `xllcorner`, `yllcorner`, `cellsize`,
//! `NODATA_value`) followed by `nrows` lines of `ncols` values, northernmost
//! row first. Cell values are attached to cell centres and interpolated
//! bilinearly between them. All coordinates are in a local metric frame.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Point2, Point3};

const WHAT: &str = "terrain grid";

#[derive(Debug, Clone, PartialEq)]
pub struct TerrainGrid {
    ncols: usize,
    nrows: usize,
    x_origin: f64,
    y_origin: f64,
    cell_size: f64,
    /// Row-major, northernmost row first (file order).
    elevations: Vec<f64>,
    nodata: f64,
}

impl TerrainGrid {
    /// Builds a grid from row-major elevations, northernmost row first.
    pub fn new(
        ncols: usize,
        nrows: usize,
        x_origin: f64,
        y_origin: f64,
        cell_size: f64,
        elevations: Vec<f64>,
        nodata: f64,
    ) -> Result<Self> {
        if ncols < 2 || nrows < 2 {
            return Err(Error::invalid(format!(
                "terrain grid needs at least 2x2 cells, got {ncols}x{nrows}"
            )));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::invalid(format!("cell size must be positive, got {cell_size}")));
        }
        if !x_origin.is_finite() || !y_origin.is_finite() {
            return Err(Error::invalid("terrain origin must be finite"));
        }
        if elevations.len() != ncols * nrows {
            return Err(Error::invalid(format!(
                "expected {} elevations, got {}",
                ncols * nrows,
                elevations.len()
            )));
        }
        if let Some(bad) = elevations.iter().find(|v| !v.is_finite() && **v != nodata) {
            return Err(Error::invalid(format!("non-finite elevation {bad}")));
        }
        Ok(Self {
            ncols,
            nrows,
            x_origin,
            y_origin,
            cell_size,
            elevations,
            nodata,
        })
    }

    /// Uniform elevation field, handy for tests and flat scenarios.
    pub fn flat(ncols: usize, nrows: usize, x_origin: f64, y_origin: f64, cell_size: f64, z: f64) -> Result<Self> {
        Self::new(ncols, nrows, x_origin, y_origin, cell_size, vec![z; ncols * nrows], -9999.0)
    }

    /// Samples `f(x, y)` at every cell centre.
    pub fn from_fn(
        ncols: usize,
        nrows: usize,
        x_origin: f64,
        y_origin: f64,
        cell_size: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut elevations = Vec::with_capacity(ncols * nrows);
        for r in 0..nrows {
            let y = y_origin + (nrows - r) as f64 * cell_size - 0.5 * cell_size;
            for c in 0..ncols {
                let x = x_origin + (c as f64 + 0.5) * cell_size;
                elevations.push(f(x, y));
            }
        }
        Self::new(ncols, nrows, x_origin, y_origin, cell_size, elevations, -9999.0)
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_ascii_grid(text)
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn x_origin(&self) -> f64 {
        self.x_origin
    }
    pub fn y_origin(&self) -> f64 {
        self.y_origin
    }
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }
    pub fn nodata(&self) -> f64 {
        self.nodata
    }
    pub fn elevations(&self) -> &[f64] {
        &self.elevations
    }

    /// Value stored at (`row` from the top, `col` from the left).
    pub fn cell(&self, row: usize, col: usize) -> f64 {
        self.elevations[row * self.ncols + col]
    }

    pub fn x_max(&self) -> f64 {
        self.x_origin + self.ncols as f64 * self.cell_size
    }
    pub fn y_max(&self) -> f64 {
        self.y_origin + self.nrows as f64 * self.cell_size
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_origin && x <= self.x_max() && y >= self.y_origin && y <= self.y_max()
    }

    /// Nearest point of the grid extent.
    pub fn clamp_to_extent(&self, p: Point2) -> Point2 {
        Point2::new(
            p.x.clamp(self.x_origin, self.x_max()),
            p.y.clamp(self.y_origin, self.y_max()),
        )
    }

    fn is_nodata(&self, v: f64) -> bool {
        v == self.nodata || !v.is_finite()
    }

    /// Lowest valid elevation in the grid.
    pub fn min_elevation(&self) -> f64 {
        self.elevations
            .iter()
            .copied()
            .filter(|v| !self.is_nodata(*v))
            .fold(f64::INFINITY, f64::min)
    }

    /// Bilinear ground elevation at (x, y).
    ///
    /// Within the outer half cell, where fewer than four cell centres surround
    /// the query, the nearest edge patch is extended linearly so affine
    /// surfaces are still reproduced exactly.
    pub fn elevation_at(&self, x: f64, y: f64) -> Result<f64> {
        if !self.contains(x, y) || !x.is_finite() || !y.is_finite() {
            return Err(Error::OutOfExtent { what: WHAT, x, y });
        }
        // Fractional indices measured between cell centres; row index grows northwards.
        let fx = (x - self.x_origin) / self.cell_size - 0.5;
        let fy = (y - self.y_origin) / self.cell_size - 0.5;
        let c0 = (fx.floor().max(0.0) as usize).min(self.ncols - 2);
        let s0 = (fy.floor().max(0.0) as usize).min(self.nrows - 2);
        let tx = fx - c0 as f64;
        let ty = fy - s0 as f64;

        let at = |south_idx: usize, col: usize| self.cell(self.nrows - 1 - south_idx, col);
        let z00 = at(s0, c0);
        let z10 = at(s0, c0 + 1);
        let z01 = at(s0 + 1, c0);
        let z11 = at(s0 + 1, c0 + 1);
        if [z00, z10, z01, z11].iter().any(|v| self.is_nodata(*v)) {
            return Err(Error::NoData { x, y });
        }
        let south = z00 + (z10 - z00) * tx;
        let north = z01 + (z11 - z01) * tx;
        Ok(south + (north - south) * ty)
    }

    /// Height of `pos` above the ground directly below it.
    pub fn relative_height(&self, pos: Point3) -> Result<f64> {
        Ok(pos.z - self.elevation_at(pos.x, pos.y)?)
    }

    /// Terrain occlusion test between two 3D points.
    ///
    /// The segment is sampled at `ceil(len / step)` equal intervals; only the
    /// strictly interior samples are tested, so the endpoints (typically a
    /// camera and a point lying on the ground) never occlude themselves.
    pub fn line_of_sight(&self, from: Point3, to: Point3, step: f64) -> Result<bool> {
        if !(step > 0.0) {
            return Err(Error::invalid(format!("line-of-sight step must be positive, got {step}")));
        }
        for p in [from, to] {
            if !self.contains(p.x, p.y) {
                return Err(Error::OutOfExtent { what: WHAT, x: p.x, y: p.y });
            }
        }
        let n = (from.dist(to) / step).ceil().max(1.0) as usize;
        let nf = n as f64;
        for k in 1..n {
            // Weights built from integers so the sample set is identical when
            // the endpoints are swapped.
            let wt = k as f64 / nf;
            let wf = (n - k) as f64 / nf;
            let x = from.x * wf + to.x * wt;
            let y = from.y * wf + to.y * wt;
            let z = from.z * wf + to.z * wt;
            if z < self.elevation_at(x, y)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// [`line_of_sight`](Self::line_of_sight) with the default step of half a cell.
    pub fn visible(&self, from: Point3, to: Point3) -> Result<bool> {
        self.line_of_sight(from, to, 0.5 * self.cell_size)
    }

    /// Upper bound of the ground elevation over the disc of radius `r` around `c`.
    ///
    /// Each interpolation patch (extended over the outer half cell at the grid
    /// edge) is bilinear, so its extremes sit at its four corners; the bound is
    /// the largest corner value among patches touching the disc. Parts of the
    /// disc outside the extent are ignored.
    pub fn max_elevation_within(&self, c: Point2, r: f64) -> Result<f64> {
        self.patch_corner_fold(c, r, f64::NEG_INFINITY, f64::max)
    }

    /// Lower bound of the ground elevation over the disc; see
    /// [`max_elevation_within`](Self::max_elevation_within).
    pub fn min_elevation_within(&self, c: Point2, r: f64) -> Result<f64> {
        self.patch_corner_fold(c, r, f64::INFINITY, f64::min)
    }

    fn patch_corner_fold(&self, c: Point2, r: f64, init: f64, fold: fn(f64, f64) -> f64) -> Result<f64> {
        if !self.contains(c.x, c.y) || !c.x.is_finite() || !c.y.is_finite() {
            return Err(Error::OutOfExtent { what: WHAT, x: c.x, y: c.y });
        }
        let r = r.max(0.0);
        let h = self.cell_size;
        // Patch k spans between cell centres k and k + 1; the first and last
        // patches also cover the outer half cell.
        let edges = |origin: f64, n: usize, k: usize| {
            let lo = if k == 0 { origin } else { origin + (k as f64 + 0.5) * h };
            let hi = if k + 2 == n { origin + n as f64 * h } else { origin + (k as f64 + 1.5) * h };
            (lo, hi)
        };
        let patch_of = |v: f64, origin: f64, n: usize| (((v - origin) / h - 0.5).floor().max(0.0) as usize).min(n - 2);
        let c_lo = patch_of(c.x - r, self.x_origin, self.ncols);
        let c_hi = patch_of(c.x + r, self.x_origin, self.ncols);
        let s_lo = patch_of(c.y - r, self.y_origin, self.nrows);
        let s_hi = patch_of(c.y + r, self.y_origin, self.nrows);
        let mut acc = init;
        for s in s_lo..=s_hi {
            let (y0, y1) = edges(self.y_origin, self.nrows, s);
            let dy = (y0 - c.y).max(c.y - y1).max(0.0);
            for col in c_lo..=c_hi {
                let (x0, x1) = edges(self.x_origin, self.ncols, col);
                let dx = (x0 - c.x).max(c.x - x1).max(0.0);
                if dx.hypot(dy) > r {
                    continue;
                }
                for (x, y) in [(x0, y0), (x1, y0), (x0, y1), (x1, y1)] {
                    acc = fold(acc, self.elevation_at(x.min(self.x_max()), y.min(self.y_max()))?);
                }
            }
        }
        Ok(acc)
    }

    /// Serializes back to the ASCII grid layout.
    pub fn to_ascii_grid(&self) -> String {
        let mut out = format!(
            "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\nNODATA_value {}\n",
            self.ncols, self.nrows, self.x_origin, self.y_origin, self.cell_size, self.nodata
        );
        for row in self.elevations.chunks(self.ncols) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// One-line summary of the header, echoed when a file is loaded.
    pub fn report(&self) -> LoadReport<'_> {
        LoadReport(self)
    }
}

pub struct LoadReport<'a>(&'a TerrainGrid);

impl fmt::Display for LoadReport<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = self.0;
        write!(
            f,
            "terrain: ncols={} nrows={} xllcorner={} yllcorner={} cellsize={} NODATA_value={}",
            g.ncols, g.nrows, g.x_origin, g.y_origin, g.cell_size, g.nodata
        )
    }
}

/// Reads a terrain grid from a file in the ASCII grid layout.
pub fn load_terrain(path: impl AsRef<Path>) -> Result<TerrainGrid> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ascii_grid(&text)
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        what: WHAT,
        line,
        msg: msg.into(),
    }
}

fn parse_ascii_grid(text: &str) -> Result<TerrainGrid> {
    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut center_ref = false;
    let mut cell_size = None;
    let mut nodata = -9999.0;

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
    while let Some(&(lineno, line)) = lines.peek() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            lines.next();
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let key = parts.next().unwrap_or_default();
        if !key.starts_with(|c: char| c.is_ascii_alphabetic()) {
            break;
        }
        let value = parts
            .next()
            .ok_or_else(|| perr(lineno, format!("header key `{key}` has no value")))?;
        if parts.next().is_some() {
            return Err(perr(lineno, format!("header key `{key}` has trailing tokens")));
        }
        let num: f64 = value
            .parse()
            .map_err(|_| perr(lineno, format!("header `{key}` value `{value}` is not a number")))?;
        let count = || -> Result<usize> {
            if num >= 0.0 && num.fract() == 0.0 && num <= u32::MAX as f64 {
                Ok(num as usize)
            } else {
                Err(perr(lineno, format!("header `{key}` must be a non-negative integer")))
            }
        };
        match key.to_ascii_lowercase().as_str() {
            "ncols" => ncols = Some(count()?),
            "nrows" => nrows = Some(count()?),
            "xllcorner" => xll = Some(num),
            "yllcorner" => yll = Some(num),
            "xllcenter" => {
                xll = Some(num);
                center_ref = true;
            }
            "yllcenter" => {
                yll = Some(num);
                center_ref = true;
            }
            "cellsize" => cell_size = Some(num),
            "nodata_value" => nodata = num,
            _ => return Err(perr(lineno, format!("unknown header key `{key}`"))),
        }
        lines.next();
    }

    let missing = |k: &str| perr(0, format!("header is missing `{k}`"));
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let mut x_origin = xll.ok_or_else(|| missing("xllcorner"))?;
    let mut y_origin = yll.ok_or_else(|| missing("yllcorner"))?;
    let cell_size = cell_size.ok_or_else(|| missing("cellsize"))?;
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(perr(0, format!("cellsize must be positive, got {cell_size}")));
    }
    if ncols < 2 || nrows < 2 {
        return Err(perr(0, format!("grid must be at least 2x2, got {ncols}x{nrows}")));
    }
    if ncols.saturating_mul(nrows) > 100_000_000 {
        return Err(perr(0, "grid too large"));
    }
    if center_ref {
        x_origin -= 0.5 * cell_size;
        y_origin -= 0.5 * cell_size;
    }

    let mut elevations = Vec::with_capacity(ncols * nrows);
    let mut row = 0usize;
    let mut last_line = 0;
    for (lineno, line) in lines {
        last_line = lineno;
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        if row > nrows {
            return Err(perr(lineno, format!("more than the declared {nrows} data rows")));
        }
        let before = elevations.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| perr(lineno, format!("row {row}: value `{tok}` is not a number")))?;
            if !v.is_finite() && v != nodata {
                return Err(perr(lineno, format!("row {row}: non-finite value `{tok}`")));
            }
            elevations.push(v);
        }
        let got = elevations.len() - before;
        if got != ncols {
            return Err(perr(lineno, format!("row {row} has {got} values, expected {ncols}")));
        }
    }
    if row != nrows {
        return Err(perr(last_line, format!("found {row} data rows, expected {nrows}")));
    }
    TerrainGrid::new(ncols, nrows, x_origin, y_origin, cell_size, elevations, nodata)
}

/// Mission start point; its ground elevation is the reference for absolute heights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomePoint {
    pub x: f64,
    pub y: f64,
    pub ground_elevation: f64,
}

impl HomePoint {
    pub fn new(grid: &TerrainGrid, x: f64, y: f64) -> Result<Self> {
        let ground_elevation = grid.elevation_at(x, y)?;
        Ok(Self { x, y, ground_elevation })
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}
