//! Image tiling with overlap, label remapping onto tiles, GSD binning and
//! the recall-per-GSD evaluator.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensing::{gsd, CameraModel};

pub const TILE_SIZE: u32 = 512;
pub const MIN_OVERLAP: u32 = 100;
/// Fraction of a box's area that must survive clipping for it to be kept.
pub const KEEP_FRACTION: f64 = 0.3;
pub const GSD_BIN_WIDTH: f64 = 0.5;
pub const CONFIDENCE_MIN: f64 = 0.5;
pub const IOU_MIN: f64 = 0.7;

/// One row of the image manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageMeta {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub camera: String,
    /// Camera height above ground, m.
    pub relative_height: f64,
    #[serde(default)]
    pub timestamp: Option<String>,
    #[serde(default)]
    pub x: Option<f64>,
    #[serde(default)]
    pub y: Option<f64>,
}

impl ImageMeta {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::invalid("image id is empty"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid(format!("image `{}` has zero size", self.id)));
        }
        if !(self.relative_height > 0.0 && self.relative_height.is_finite()) {
            return Err(Error::invalid(format!(
                "image `{}`: relative height must be positive, got {}",
                self.id, self.relative_height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TileRect {
    pub row: u32,
    pub col: u32,
    pub x0: u32,
    pub y0: u32,
    pub size: u32,
}

impl TileRect {
    pub fn name(&self, image_id: &str) -> String {
        format!("{image_id}_r{}_c{}", self.row, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileGrid {
    pub cols: u32,
    pub rows: u32,
    pub tiles: Vec<TileRect>,
}

/// Tile offsets along one axis: the fewest tiles whose pairwise overlap is
/// at least `min_overlap`, spread evenly from 0 to `extent - tile`.
pub fn axis_offsets(extent: u32, tile: u32, min_overlap: u32) -> Result<Vec<u32>> {
    if tile == 0 || min_overlap >= tile {
        return Err(Error::invalid(format!(
            "overlap {min_overlap} must be smaller than the tile size {tile}"
        )));
    }
    if extent < tile {
        return Err(Error::invalid(format!("image extent {extent} px is smaller than the tile size {tile} px")));
    }
    let span = u64::from(extent - tile);
    let stride = u64::from(tile - min_overlap);
    let gaps = span.div_ceil(stride);
    if gaps == 0 {
        return Ok(vec![0]);
    }
    // Rounded to nearest, halves up, in exact integer arithmetic.
    Ok((0..=gaps).map(|k| ((2 * k * span + gaps) / (2 * gaps)) as u32).collect())
}

pub fn plan_tiles(width: u32, height: u32, tile_size: u32, min_overlap: u32) -> Result<TileGrid> {
    let xs = axis_offsets(width, tile_size, min_overlap)?;
    let ys = axis_offsets(height, tile_size, min_overlap)?;
    let mut tiles = Vec::with_capacity(xs.len() * ys.len());
    for (row, &y0) in ys.iter().enumerate() {
        for (col, &x0) in xs.iter().enumerate() {
            tiles.push(TileRect {
                row: row as u32,
                col: col as u32,
                x0,
                y0,
                size: tile_size,
            });
        }
    }
    Ok(TileGrid {
        cols: xs.len() as u32,
        rows: ys.len() as u32,
        tiles,
    })
}

/// Normalized `class cx cy w h` box, relative to its image or tile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxLabel {
    pub class: u32,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoxLabel {
    fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - 0.5 * self.w,
            self.cy - 0.5 * self.h,
            self.cx + 0.5 * self.w,
            self.cy + 0.5 * self.h,
        )
    }

    fn to_line(self) -> String {
        format!("{} {:.6} {:.6} {:.6} {:.6}", self.class, self.cx, self.cy, self.w, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detection {
    pub label: BoxLabel,
    pub confidence: f64,
}

/// Intersection over union; zero when either box has no area.
pub fn iou(a: &BoxLabel, b: &BoxLabel) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.corners();
    let (bx0, by0, bx1, by1) = b.corners();
    // Areas from the same corners as the intersection, so equal boxes give 1.
    let area_a = (ax1 - ax0) * (ay1 - ay0);
    let area_b = (bx1 - bx0) * (by1 - by0);
    if !(area_a > 0.0 && area_b > 0.0) {
        return 0.0;
    }
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    if inter == 0.0 {
        return 0.0;
    }
    (inter / (area_a + area_b - inter)).clamp(0.0, 1.0)
}

/// Clips full-image labels to a tile and re-normalizes the kept ones.
pub fn remap_labels(labels: &[BoxLabel], width: u32, height: u32, tile: &TileRect, keep_fraction: f64) -> Vec<BoxLabel> {
    let (w, h) = (f64::from(width), f64::from(height));
    let (tx0, ty0) = (f64::from(tile.x0), f64::from(tile.y0));
    let size = f64::from(tile.size);
    labels
        .iter()
        .filter_map(|b| {
            let (x0, y0, x1, y1) = b.corners();
            let (x0, y0, x1, y1) = (x0 * w, y0 * h, x1 * w, y1 * h);
            let area = (x1 - x0) * (y1 - y0);
            let cx0 = x0.max(tx0);
            let cy0 = y0.max(ty0);
            let cx1 = x1.min(tx0 + size);
            let cy1 = y1.min(ty0 + size);
            if cx1 <= cx0 || cy1 <= cy0 || !(area > 0.0) {
                return None;
            }
            let clipped = (cx1 - cx0) * (cy1 - cy0);
            (clipped / area >= keep_fraction).then(|| BoxLabel {
                class: b.class,
                cx: (0.5 * (cx0 + cx1) - tx0) / size,
                cy: (0.5 * (cy0 + cy1) - ty0) / size,
                w: (cx1 - cx0) / size,
                h: (cy1 - cy0) / size,
            })
        })
        .collect()
}

/// Maps a tile-relative box back to full-image normalized coordinates.
pub fn tile_to_image(label: &BoxLabel, width: u32, height: u32, tile: &TileRect) -> BoxLabel {
    let size = f64::from(tile.size);
    let (w, h) = (f64::from(width), f64::from(height));
    BoxLabel {
        class: label.class,
        cx: (label.cx * size + f64::from(tile.x0)) / w,
        cy: (label.cy * size + f64::from(tile.y0)) / h,
        w: label.w * size / w,
        h: label.h * size / h,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GsdBin {
    pub index: usize,
    pub low: f64,
    pub high: f64,
    /// Horizontal GSD of the image, cm/px.
    pub gsd: f64,
}

pub fn bin_of_gsd(value: f64) -> Result<GsdBin> {
    if !(value >= 0.0 && value.is_finite()) {
        return Err(Error::invalid(format!("GSD must be non-negative, got {value}")));
    }
    let index = (value / GSD_BIN_WIDTH).floor() as usize;
    Ok(GsdBin {
        index,
        low: index as f64 * GSD_BIN_WIDTH,
        high: (index + 1) as f64 * GSD_BIN_WIDTH,
        gsd: value,
    })
}

/// Half-open bin `[k * 0.5, (k + 1) * 0.5)` of the image's horizontal GSD.
pub fn gsd_bin(meta: &ImageMeta, cameras: &BTreeMap<String, CameraModel>) -> Result<GsdBin> {
    let camera = cameras
        .get(&meta.camera)
        .cloned()
        .or_else(|| CameraModel::preset(&meta.camera))
        .ok_or_else(|| Error::invalid(format!("image `{}`: unknown camera `{}`", meta.id, meta.camera)))?;
    bin_of_gsd(gsd(&camera, meta.relative_height)?.horizontal)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecallRow {
    pub bin: usize,
    pub gsd_low: f64,
    pub gsd_high: f64,
    pub recall: f64,
    pub matched: usize,
    pub support: usize,
}

/// Ground-truth boxes matched by greedy confidence-descending assignment.
/// Ties in confidence are broken by box coordinates, and each detection
/// takes the unmatched box of its class with the highest IoU.
pub fn greedy_matches(ground_truth: &[BoxLabel], detections: &[Detection], conf_min: f64, iou_min: f64) -> usize {
    let mut dets: Vec<&Detection> = detections.iter().filter(|d| d.confidence >= conf_min).collect();
    dets.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(a.label.cx.total_cmp(&b.label.cx))
            .then(a.label.cy.total_cmp(&b.label.cy))
            .then(a.label.w.total_cmp(&b.label.w))
            .then(a.label.h.total_cmp(&b.label.h))
            .then(a.label.class.cmp(&b.label.class))
    });
    let mut taken = vec![false; ground_truth.len()];
    let mut matched = 0;
    for d in dets {
        let best = ground_truth
            .iter()
            .enumerate()
            .filter(|(i, g)| !taken[*i] && g.class == d.label.class)
            .map(|(i, g)| (i, iou(g, &d.label)))
            .filter(|&(_, v)| v >= iou_min)
            .fold(None::<(usize, f64)>, |best, (i, v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((i, v)),
            });
        if let Some((i, _)) = best {
            taken[i] = true;
            matched += 1;
        }
    }
    matched
}

/// Recall per GSD bin; bins without ground truth are omitted.
pub fn recall_per_bin(
    metas: &[ImageMeta],
    ground_truth: &BTreeMap<String, Vec<BoxLabel>>,
    detections: &BTreeMap<String, Vec<Detection>>,
    cameras: &BTreeMap<String, CameraModel>,
    conf_min: f64,
    iou_min: f64,
) -> Result<Vec<RecallRow>> {
    let by_id: BTreeMap<&str, &ImageMeta> = metas.iter().map(|m| (m.id.as_str(), m)).collect();
    let unknown: Vec<&str> = ground_truth
        .keys()
        .chain(detections.keys())
        .map(String::as_str)
        .filter(|id| !by_id.contains_key(id))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if !unknown.is_empty() {
        return Err(Error::invalid(format!("labels reference images missing from the manifest: {}", unknown.join(", "))));
    }
    let mut bins: BTreeMap<usize, RecallRow> = BTreeMap::new();
    for meta in metas {
        let gt = ground_truth.get(&meta.id).map_or(&[][..], Vec::as_slice);
        if gt.is_empty() {
            continue;
        }
        let bin = gsd_bin(meta, cameras)?;
        let dets = detections.get(&meta.id).map_or(&[][..], Vec::as_slice);
        let row = bins.entry(bin.index).or_insert(RecallRow {
            bin: bin.index,
            gsd_low: bin.low,
            gsd_high: bin.high,
            recall: 0.0,
            matched: 0,
            support: 0,
        });
        row.matched += greedy_matches(gt, dets, conf_min, iou_min);
        row.support += gt.len();
    }
    Ok(bins
        .into_values()
        .map(|mut r| {
            r.recall = r.matched as f64 / r.support as f64;
            r
        })
        .collect())
}

const LABELS: &str = "label file";

fn label_error(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        what: LABELS,
        line,
        msg: msg.into(),
    }
}

fn parse_lines(text: &str) -> Result<Vec<(usize, BoxLabel, Option<f64>)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 5 && fields.len() != 6 {
            return Err(label_error(n, format!("expected 5 or 6 fields, got {}", fields.len())));
        }
        let class: u32 = fields[0]
            .parse()
            .map_err(|_| label_error(n, format!("bad class id `{}`", fields[0])))?;
        let mut nums = [0.0; 5];
        for (k, f) in fields[1..].iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| label_error(n, format!("bad number `{f}`")))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(label_error(n, format!("value {v} is outside [0, 1]")));
            }
            nums[k] = v;
        }
        let label = BoxLabel {
            class,
            cx: nums[0],
            cy: nums[1],
            w: nums[2],
            h: nums[3],
        };
        out.push((n, label, (fields.len() == 6).then_some(nums[4])));
    }
    Ok(out)
}

/// Ground-truth labels: `class cx cy w h` per line.
pub fn parse_labels(text: &str) -> Result<Vec<BoxLabel>> {
    parse_lines(text)?
        .into_iter()
        .map(|(n, l, c)| match c {
            None => Ok(l),
            Some(_) => Err(label_error(n, "ground-truth label has a confidence column")),
        })
        .collect()
}

/// Detections: `class cx cy w h confidence` per line.
pub fn parse_detections(text: &str) -> Result<Vec<Detection>> {
    parse_lines(text)?
        .into_iter()
        .map(|(n, label, c)| {
            c.map(|confidence| Detection { label, confidence })
                .ok_or_else(|| label_error(n, "detection has no confidence column"))
        })
        .collect()
}

pub fn format_labels(labels: &[BoxLabel]) -> String {
    labels.iter().map(|l| l.to_line() + "\n").collect()
}

/// Parses the image manifest CSV (`id,width,height,camera,relative_height`
/// plus optional `timestamp,x,y`).
pub fn parse_manifest(text: &str) -> Result<Vec<ImageMeta>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out: Vec<ImageMeta> = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, row) in reader.deserialize().enumerate() {
        // Header is line 1.
        let line = i + 2;
        let meta: ImageMeta = row.map_err(|e| Error::Parse {
            what: "image manifest",
            line,
            msg: e.to_string(),
        })?;
        meta.validate().map_err(|e| Error::Parse {
            what: "image manifest",
            line,
            msg: e.to_string(),
        })?;
        if !seen.insert(meta.id.clone()) {
            return Err(Error::Parse {
                what: "image manifest",
                line,
                msg: format!("duplicate image id `{}`", meta.id),
            });
        }
        out.push(meta);
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ImageMeta>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

/// Reads every `<image-id>.txt` in `dir` with `parse`. Files whose stem is
/// not a manifest id are reported together as one error.
pub fn load_label_dir<T>(
    dir: &Path,
    metas: &[ImageMeta],
    parse: impl Fn(&str) -> Result<Vec<T>>,
) -> Result<BTreeMap<String, Vec<T>>> {
    let ids: BTreeSet<&str> = metas.iter().map(|m| m.id.as_str()).collect();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            paths.push(path);
        }
    }
    paths.sort();
    let mut out = BTreeMap::new();
    let mut orphans = Vec::new();
    for path in paths {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        if !ids.contains(stem.as_str()) {
            orphans.push(stem);
            continue;
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let labels = parse(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        out.insert(stem, labels);
    }
    if !orphans.is_empty() {
        return Err(Error::invalid(format!(
            "{}: label files without a manifest entry: {}",
            dir.display(),
            orphans.join(", ")
        )));
    }
    Ok(out)
}
