//! Search zones, the rectangular flight domain and the initial target density.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point2;

/// Cell-centred raster layout shared by every field over the flight domain.
///
/// Cell `(col, row)` has its centre at
/// `(x_origin + (col + 0.5) * cell_size, y_origin + (row + 0.5) * cell_size)`;
/// rows grow northwards and storage is row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_origin: f64,
    pub y_origin: f64,
    pub cell_size: f64,
    pub ncols: usize,
    pub nrows: usize,
}

impl GridSpec {
    pub fn new(x_origin: f64, y_origin: f64, cell_size: f64, ncols: usize, nrows: usize) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::invalid(format!("grid cell size must be positive, got {cell_size}")));
        }
        if ncols == 0 || nrows == 0 {
            return Err(Error::invalid("grid must have at least one cell"));
        }
        if ncols.saturating_mul(nrows) > 50_000_000 {
            return Err(Error::invalid("grid too large"));
        }
        Ok(Self {
            x_origin,
            y_origin,
            cell_size,
            ncols,
            nrows,
        })
    }

    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.ncols + col
    }

    pub fn center(&self, col: usize, row: usize) -> Point2 {
        Point2::new(
            self.x_origin + (col as f64 + 0.5) * self.cell_size,
            self.y_origin + (row as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn center_of(&self, idx: usize) -> Point2 {
        self.center(idx % self.ncols, idx / self.ncols)
    }

    pub fn x_max(&self) -> f64 {
        self.x_origin + self.ncols as f64 * self.cell_size
    }

    pub fn y_max(&self) -> f64 {
        self.y_origin + self.nrows as f64 * self.cell_size
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_origin && p.x <= self.x_max() && p.y >= self.y_origin && p.y <= self.y_max()
    }

    /// Cell containing `p`, if any. Points on the far edges map to the last cell.
    pub fn cell_of(&self, p: Point2) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let col = (((p.x - self.x_origin) / self.cell_size) as usize).min(self.ncols - 1);
        let row = (((p.y - self.y_origin) / self.cell_size) as usize).min(self.nrows - 1);
        Some(self.index(col, row))
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }
    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
    pub fn center(&self) -> Point2 {
        Point2::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

fn signed_area(polygon: &[Point2]) -> f64 {
    let n = polygon.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

fn on_segment(p: Point2, a: Point2, b: Point2) -> bool {
    let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    let scale = (b.x - a.x).abs().max((b.y - a.y).abs()).max(1.0);
    if cross.abs() > 1e-12 * scale * scale {
        return false;
    }
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Even-odd ray casting; points on an edge or vertex count as inside.
pub fn point_in_polygon(polygon: &[Point2], p: Point2) -> Result<bool> {
    if polygon.len() < 3 || signed_area(polygon) == 0.0 {
        return Err(Error::invalid("degenerate polygon (fewer than 3 vertices or zero area)"));
    }
    Ok(point_in_polygon_unchecked(polygon, p))
}

fn point_in_polygon_unchecked(polygon: &[Point2], p: Point2) -> bool {
    let n = polygon.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[j];
        if on_segment(p, a, b) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub id: String,
    pub polygon: Vec<Point2>,
    pub person_count: u32,
    area: f64,
}

impl Zone {
    pub fn new(id: impl Into<String>, polygon: Vec<Point2>, person_count: u32) -> Result<Self> {
        let id = id.into();
        if polygon.len() < 3 {
            return Err(Error::invalid(format!("zone `{id}` needs at least 3 vertices")));
        }
        if polygon.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::invalid(format!("zone `{id}` has non-finite vertices")));
        }
        let area = signed_area(&polygon).abs();
        if !(area > 0.0) {
            return Err(Error::invalid(format!("zone `{id}` has zero area")));
        }
        Ok(Self {
            id,
            polygon,
            person_count,
            area,
        })
    }

    /// Polygon area in m².
    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn contains(&self, p: Point2) -> bool {
        point_in_polygon_unchecked(&self.polygon, p)
    }

    pub fn bounds(&self) -> Rect {
        bounding_rect(self.polygon.iter().copied())
    }
}

fn bounding_rect(points: impl Iterator<Item = Point2>) -> Rect {
    let mut r = Rect {
        x_min: f64::INFINITY,
        y_min: f64::INFINITY,
        x_max: f64::NEG_INFINITY,
        y_max: f64::NEG_INFINITY,
    };
    for p in points {
        r.x_min = r.x_min.min(p.x);
        r.y_min = r.y_min.min(p.y);
        r.x_max = r.x_max.max(p.x);
        r.y_max = r.y_max.max(p.y);
    }
    r
}

fn segments_cross(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let orient = |p: Point2, q: Point2, r: Point2| (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// True if the interiors of two simple polygons intersect. Shared edges and
/// touching vertices are allowed.
pub fn polygons_overlap(p: &[Point2], q: &[Point2]) -> bool {
    let edges = |poly: &[Point2]| {
        let n = poly.len();
        (0..n).map(move |i| (poly[i], poly[(i + 1) % n])).collect::<Vec<_>>()
    };
    let ep = edges(p);
    let eq = edges(q);
    for &(a, b) in &ep {
        for &(c, d) in &eq {
            if segments_cross(a, b, c, d) {
                return true;
            }
        }
    }
    let strictly_inside = |poly: &[Point2], edges: &[(Point2, Point2)], pt: Point2| {
        point_in_polygon_unchecked(poly, pt) && !edges.iter().any(|&(a, b)| on_segment(pt, a, b))
    };
    // Vertices and edge midpoints catch containment and coincident polygons.
    let probes = |poly: &[Point2]| {
        let n = poly.len();
        let mut pts: Vec<Point2> = poly.to_vec();
        pts.extend((0..n).map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y))
        }));
        pts
    };
    probes(p).into_iter().any(|pt| strictly_inside(q, &eq, pt))
        || probes(q).into_iter().any(|pt| strictly_inside(p, &ep, pt))
        || (p.len() == q.len() && {
            let rp = bounding_rect(p.iter().copied());
            let rq = bounding_rect(q.iter().copied());
            rp == rq && (signed_area(p).abs() - signed_area(q).abs()).abs() < 1e-9 * signed_area(p).abs()
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchDomain {
    pub zones: Vec<Zone>,
    pub offset: f64,
    /// The flight domain; the potential field lives on `grid`, which starts
    /// at the lower-left corner of this rectangle and covers it.
    pub boundary: Rect,
    pub grid: GridSpec,
}

impl SearchDomain {
    pub fn center(&self) -> Point2 {
        self.boundary.center()
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.grid.contains(p)
    }

    pub fn total_people(&self) -> u32 {
        self.zones.iter().map(|z| z.person_count).sum()
    }

    pub fn initial_density(&self) -> Result<DensityGrid> {
        build_initial_density(&self.zones, self.grid, self.total_people())
    }
}

/// Offset bounding rectangle of all zones, rasterized at `cell_size`.
pub fn build_flight_domain(zones: &[Zone], offset: f64, cell_size: f64) -> Result<SearchDomain> {
    if zones.is_empty() {
        return Err(Error::invalid("flight domain needs at least one zone"));
    }
    if !(offset >= 0.0) || !offset.is_finite() {
        return Err(Error::invalid(format!("offset must be non-negative, got {offset}")));
    }
    for (i, a) in zones.iter().enumerate() {
        for b in &zones[i + 1..] {
            if polygons_overlap(&a.polygon, &b.polygon) {
                return Err(Error::invalid(format!("zones `{}` and `{}` overlap", a.id, b.id)));
            }
        }
    }
    let hull = bounding_rect(zones.iter().flat_map(|z| z.polygon.iter().copied()));
    let boundary = Rect {
        x_min: hull.x_min - offset,
        y_min: hull.y_min - offset,
        x_max: hull.x_max + offset,
        y_max: hull.y_max + offset,
    };
    let ncols = ((boundary.width() / cell_size) - 1e-9).ceil().max(1.0) as usize;
    let nrows = ((boundary.height() / cell_size) - 1e-9).ceil().max(1.0) as usize;
    let grid = GridSpec::new(boundary.x_min, boundary.y_min, cell_size, ncols, nrows)?;
    Ok(SearchDomain {
        zones: zones.to_vec(),
        offset,
        boundary,
        grid,
    })
}

/// A per-cell field over a [`GridSpec`], in 1/m² for densities.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            values: vec![0.0; spec.len()],
        }
    }

    pub fn cell_area(&self) -> f64 {
        self.spec.cell_area()
    }

    /// Discrete integral over the grid.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    pub fn value_at(&self, p: Point2) -> Option<f64> {
        self.spec.cell_of(p).map(|i| self.values[i])
    }
}

/// Zone index of every cell whose centre lies in a zone.
pub fn zone_membership(zones: &[Zone], spec: GridSpec) -> Result<Vec<Option<usize>>> {
    let mut member: Vec<Option<usize>> = vec![None; spec.len()];
    for (zi, zone) in zones.iter().enumerate() {
        let b = zone.bounds();
        let col_lo = (((b.x_min - spec.x_origin) / spec.cell_size - 0.5).floor().max(0.0)) as usize;
        let row_lo = (((b.y_min - spec.y_origin) / spec.cell_size - 0.5).floor().max(0.0)) as usize;
        let col_hi = ((((b.x_max - spec.x_origin) / spec.cell_size - 0.5).ceil().max(0.0)) as usize).min(spec.ncols - 1);
        let row_hi = ((((b.y_max - spec.y_origin) / spec.cell_size - 0.5).ceil().max(0.0)) as usize).min(spec.nrows - 1);
        if col_lo > col_hi || row_lo > row_hi {
            continue;
        }
        for row in row_lo..=row_hi {
            for col in col_lo..=col_hi {
                if zone.contains(spec.center(col, row)) {
                    let idx = spec.index(col, row);
                    if let Some(other) = member[idx] {
                        return Err(Error::invalid(format!(
                            "zones `{}` and `{}` both claim the cell centred at {:?}",
                            zones[other].id,
                            zone.id,
                            spec.center(col, row)
                        )));
                    }
                    member[idx] = Some(zi);
                }
            }
        }
    }
    Ok(member)
}

/// Uniform per-zone density normalized to a unit discrete integral.
///
/// Each zone receives probability mass `person_count / total_people`, spread
/// evenly over the cells whose centres it contains. The discretized zone area
/// is the denominator, so the integral is one by construction.
pub fn build_initial_density(zones: &[Zone], spec: GridSpec, total_people: u32) -> Result<DensityGrid> {
    if zones.is_empty() {
        return Err(Error::invalid("no zones"));
    }
    let sum: u32 = zones.iter().map(|z| z.person_count).sum();
    if total_people == 0 || sum != total_people {
        return Err(Error::invalid(format!(
            "total_people {total_people} must equal the zones' person count {sum} and be positive"
        )));
    }
    let member = zone_membership(zones, spec)?;
    let mut counts = vec![0usize; zones.len()];
    for z in member.iter().flatten() {
        counts[*z] += 1;
    }
    if let Some((zi, _)) = counts.iter().enumerate().find(|(_, c)| **c == 0) {
        return Err(Error::invalid(format!(
            "zone `{}` covers no cell centres at cell size {}",
            zones[zi].id, spec.cell_size
        )));
    }
    let density: Vec<f64> = zones
        .iter()
        .zip(&counts)
        .map(|(z, &n)| (z.person_count as f64 / total_people as f64) / (n as f64 * spec.cell_area()))
        .collect();
    let values = member.iter().map(|m| m.map_or(0.0, |zi| density[zi])).collect();
    Ok(DensityGrid { spec, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, s: f64) -> Vec<Point2> {
        vec![
            Point2::new(x0, y0),
            Point2::new(x0 + s, y0),
            Point2::new(x0 + s, y0 + s),
            Point2::new(x0, y0 + s),
        ]
    }

    #[test]
    fn unit_square_membership() {
        let sq = square(0.0, 0.0, 1.0);
        assert!(point_in_polygon(&sq, Point2::new(0.5, 0.5)).unwrap());
        assert!(!point_in_polygon(&sq, Point2::new(2.0, 0.5)).unwrap());
        assert!(point_in_polygon(&sq, Point2::new(1.0, 0.5)).unwrap());
        assert!(point_in_polygon(&sq, Point2::new(0.0, 0.0)).unwrap());
    }

    #[test]
    fn degenerate_polygon_rejected() {
        let line = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(2.0, 2.0)];
        assert!(point_in_polygon(&line, Point2::new(0.5, 0.5)).is_err());
        assert!(Zone::new("z", line, 1).is_err());
    }

    #[test]
    fn flight_domain_offsets() {
        let z = Zone::new("a", square(0.0, 0.0, 1.0), 1).unwrap();
        let d = build_flight_domain(std::slice::from_ref(&z), 50.0, 1.0).unwrap();
        assert_eq!(d.boundary.width(), 101.0);
        assert_eq!(d.boundary.x_min, -50.0);
        let d0 = build_flight_domain(&[z], 0.0, 0.5).unwrap();
        assert_eq!(d0.boundary, Rect { x_min: 0.0, y_min: 0.0, x_max: 1.0, y_max: 1.0 });
        assert_eq!((d0.grid.ncols, d0.grid.nrows), (2, 2));
        assert!(build_flight_domain(&[], 10.0, 1.0).is_err());
    }

    #[test]
    fn single_zone_uniform_density() {
        let z = Zone::new("a", square(0.0, 0.0, 1000.0), 10).unwrap();
        let d = build_flight_domain(std::slice::from_ref(&z), 100.0, 10.0).unwrap();
        let m0 = build_initial_density(&[z], d.grid, 10).unwrap();
        assert!((m0.integral() - 1.0).abs() < 1e-12);
        let inside = m0.value_at(Point2::new(500.0, 500.0)).unwrap();
        assert!((inside - 1e-6).abs() < 1e-18);
        assert_eq!(m0.value_at(Point2::new(-50.0, 500.0)).unwrap(), 0.0);
    }

    #[test]
    fn wrong_total_and_empty_zone_rejected() {
        let z = Zone::new("a", square(0.0, 0.0, 100.0), 3).unwrap();
        let spec = GridSpec::new(0.0, 0.0, 10.0, 10, 10).unwrap();
        assert!(build_initial_density(std::slice::from_ref(&z), spec, 4).is_err());
        let tiny = Zone::new("t", square(1.0, 1.0, 2.0), 1).unwrap();
        assert!(build_initial_density(&[tiny], spec, 1).is_err());
    }

    #[test]
    fn overlap_detection() {
        let a = square(0.0, 0.0, 10.0);
        let b = square(5.0, 5.0, 10.0);
        let c = square(10.0, 0.0, 10.0);
        let inner = square(2.0, 2.0, 2.0);
        assert!(polygons_overlap(&a, &b));
        assert!(!polygons_overlap(&a, &c));
        assert!(polygons_overlap(&a, &inner));
        assert!(polygons_overlap(&a, &a));
    }
}
