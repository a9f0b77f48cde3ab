//! Bird's-eye-view coordinate machinery: the flat-ground pinhole camera
//! model, ROI normalization, polyline clipping and resampling at BEV
//! resolution, the depthwise-motion augmentation warp, and the split
//! positional encoding grid.
//!
//! Conventions: image pixels are `(row m, col n)` with row 0 at the top;
//! ground points are `(x, z)` in meters with `x` lateral and `z` the
//! forward depth. A positive ego displacement `beta` moves the camera
//! forward, so scene content gets `beta` meters closer.

use crate::curve::Polyline;
use crate::geom::Point2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BevError {
    #[error("camera parameter out of range: {0}")]
    InvalidCamera(String),
    #[error("roi parameter out of range: {0}")]
    InvalidRoi(String),
    #[error("pixel row {row:.3} is at or above the horizon row {horizon:.3}")]
    AboveHorizon { row: f64, horizon: f64 },
    #[error("depth {0:.3} m is not in front of the camera")]
    BehindCamera(f64),
    #[error("point ({0:.3}, {1:.3}) m outside the region of interest")]
    OutsideRoi(f64, f64),
    #[error("warp is singular for this pixel/displacement combination")]
    WarpSingularity,
    #[error("polyline needs at least 2 points, got {0}")]
    DegeneratePolyline(usize),
    #[error("positional encoding channel count {0} must be even")]
    OddChannels(usize),
}

/// Pinhole camera looking along +z from height `camera_height` above a
/// flat ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCamera", into = "RawCamera")]
pub struct CameraModel {
    /// Focal length in pixels.
    pub focal: f64,
    /// Principal point column (d_x).
    pub center_col: f64,
    /// Principal point row (d_y); also the horizon row under the
    /// flat-ground assumption.
    pub center_row: f64,
    /// Camera height above ground in meters.
    pub camera_height: f64,
    pub image_width: usize,
    pub image_height: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawCamera {
    focal: f64,
    center_col: f64,
    center_row: f64,
    camera_height: f64,
    image_width: usize,
    image_height: usize,
}

impl TryFrom<RawCamera> for CameraModel {
    type Error = BevError;
    fn try_from(r: RawCamera) -> Result<Self, Self::Error> {
        CameraModel::new(
            r.focal,
            r.center_col,
            r.center_row,
            r.camera_height,
            r.image_width,
            r.image_height,
        )
    }
}

impl From<CameraModel> for RawCamera {
    fn from(c: CameraModel) -> Self {
        RawCamera {
            focal: c.focal,
            center_col: c.center_col,
            center_row: c.center_row,
            camera_height: c.camera_height,
            image_width: c.image_width,
            image_height: c.image_height,
        }
    }
}

impl CameraModel {
    pub fn new(
        focal: f64,
        center_col: f64,
        center_row: f64,
        camera_height: f64,
        image_width: usize,
        image_height: usize,
    ) -> Result<Self, BevError> {
        if !(focal.is_finite() && focal > 0.0) {
            return Err(BevError::InvalidCamera(format!("focal {focal}")));
        }
        if !(camera_height.is_finite() && camera_height > 0.0) {
            return Err(BevError::InvalidCamera(format!(
                "camera height {camera_height}"
            )));
        }
        if !(0.0..=image_width as f64).contains(&center_col)
            || !(0.0..=image_height as f64).contains(&center_row)
        {
            return Err(BevError::InvalidCamera(format!(
                "principal point ({center_col}, {center_row}) outside {image_width}x{image_height}"
            )));
        }
        Ok(Self {
            focal,
            center_col,
            center_row,
            camera_height,
            image_width,
            image_height,
        })
    }

    /// The paper-scale default: a 448x800 image.
    pub fn default_paper() -> Self {
        Self::new(500.0, 400.0, 224.0, 1.5, 800, 448).unwrap()
    }
}

/// Evaluated BEV region and rasterization resolution, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRoi", into = "RawRoi")]
pub struct RoiSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// Grid cell size in meters.
    pub resolution: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawRoi {
    x_min: f64,
    x_max: f64,
    z_min: f64,
    z_max: f64,
    resolution: f64,
}

impl TryFrom<RawRoi> for RoiSpec {
    type Error = BevError;
    fn try_from(r: RawRoi) -> Result<Self, Self::Error> {
        RoiSpec::new(r.x_min, r.x_max, r.z_min, r.z_max, r.resolution)
    }
}

impl From<RoiSpec> for RawRoi {
    fn from(r: RoiSpec) -> Self {
        RawRoi {
            x_min: r.x_min,
            x_max: r.x_max,
            z_min: r.z_min,
            z_max: r.z_max,
            resolution: r.resolution,
        }
    }
}

impl Default for RoiSpec {
    /// -25..25 m laterally, 1..50 m ahead, 25 cm cells.
    fn default() -> Self {
        Self::new(-25.0, 25.0, 1.0, 50.0, 0.25).unwrap()
    }
}

impl RoiSpec {
    pub fn new(x_min: f64, x_max: f64, z_min: f64, z_max: f64, resolution: f64) -> Result<Self, BevError> {
        if !(x_max > x_min && z_max > z_min) {
            return Err(BevError::InvalidRoi(format!(
                "empty extent x [{x_min}, {x_max}], z [{z_min}, {z_max}]"
            )));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(BevError::InvalidRoi(format!("resolution {resolution}")));
        }
        let spec = Self {
            x_min,
            x_max,
            z_min,
            z_max,
            resolution,
        };
        let (h, w) = (spec.z_extent() / resolution, spec.x_extent() / resolution);
        if (h - h.round()).abs() > 1e-9 || (w - w.round()).abs() > 1e-9 {
            return Err(BevError::InvalidRoi(format!(
                "extents {w}x{h} cells are not integral at resolution {resolution}"
            )));
        }
        Ok(spec)
    }

    pub fn x_extent(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn z_extent(&self) -> f64 {
        self.z_max - self.z_min
    }

    /// Grid rows (depth cells).
    pub fn grid_height(&self) -> usize {
        (self.z_extent() / self.resolution).round() as usize
    }

    /// Grid columns (lateral cells).
    pub fn grid_width(&self) -> usize {
        (self.x_extent() / self.resolution).round() as usize
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.z_min..=self.z_max).contains(&z)
    }
}

/// Depthwise ego displacement used by the view-synthesis augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationParams {
    /// Forward displacement in meters.
    pub beta: f64,
}

/// Ground point under the pixel, assuming a flat ground plane:
/// `z = f * C_h / (m - d_y)` and `x = (n - d_x) * z / f`.
pub fn pixel_to_ground(pixel: (f64, f64), cam: &CameraModel) -> Result<(f64, f64), BevError> {
    let (row, col) = pixel;
    if row <= cam.center_row {
        return Err(BevError::AboveHorizon {
            row,
            horizon: cam.center_row,
        });
    }
    let z = cam.focal * cam.camera_height / (row - cam.center_row);
    let x = (col - cam.center_col) * z / cam.focal;
    Ok((x, z))
}

/// Pixel that sees the ground point `(x, z)`; inverse of
/// `pixel_to_ground`.
pub fn ground_to_pixel(point: (f64, f64), cam: &CameraModel) -> Result<(f64, f64), BevError> {
    let (x, z) = point;
    if z <= 0.0 {
        return Err(BevError::BehindCamera(z));
    }
    let row = cam.center_row + cam.focal * cam.camera_height / z;
    let col = cam.center_col + x * cam.focal / z;
    Ok((row, col))
}

/// Affine map of an in-ROI metric point onto the unit square.
pub fn bev_normalize(point: (f64, f64), roi: &RoiSpec) -> Result<Point2, BevError> {
    let (x, z) = point;
    if !roi.contains(x, z) {
        return Err(BevError::OutsideRoi(x, z));
    }
    Ok(Point2::new(
        (x - roi.x_min) / roi.x_extent(),
        (z - roi.z_min) / roi.z_extent(),
    ))
}

/// Inverse of `bev_normalize` (defined on the whole plane).
pub fn bev_denormalize(point: Point2, roi: &RoiSpec) -> (f64, f64) {
    (
        roi.x_min + point.x * roi.x_extent(),
        roi.z_min + point.y * roi.z_extent(),
    )
}

/// Resample a metric polyline at `roi.resolution` arc-length spacing,
/// drop out-of-ROI samples, and return each maximal in-ROI run as its own
/// normalized polyline.
pub fn clip_resample(points: &Polyline, roi: &RoiSpec) -> Result<Vec<Polyline>, BevError> {
    if points.len() < 2 {
        return Err(BevError::DegeneratePolyline(points.len()));
    }
    let resampled = resample_by_arc_length(&points.points, roi.resolution);

    let mut segments = Vec::new();
    let mut run: Vec<Point2> = Vec::new();
    for p in resampled {
        if roi.contains(p.x, p.y) {
            run.push(bev_normalize((p.x, p.y), roi).expect("checked in-roi"));
        } else if !run.is_empty() {
            if run.len() >= 2 {
                segments.push(Polyline::new(std::mem::take(&mut run)));
            } else {
                run.clear();
            }
        }
    }
    if run.len() >= 2 {
        segments.push(Polyline::new(run));
    }
    Ok(segments)
}

/// Points spaced `step` apart along the chain, keeping the exact final
/// point (the last interval may be shorter than `step`).
fn resample_by_arc_length(points: &[Point2], step: f64) -> Vec<Point2> {
    let mut cum = Vec::with_capacity(points.len());
    cum.push(0.0);
    for w in points.windows(2) {
        cum.push(cum.last().unwrap() + w[0].dist(w[1]));
    }
    let total = *cum.last().unwrap();
    if total <= 0.0 {
        return vec![points[0]];
    }

    let mut out = Vec::new();
    let mut seg = 0usize;
    let n_steps = (total / step).floor() as usize;
    for k in 0..=n_steps {
        let s = k as f64 * step;
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let t = if span <= 0.0 { 0.0 } else { (s - cum[seg]) / span };
        out.push(points[seg].lerp(points[seg + 1], t.clamp(0.0, 1.0)));
    }
    if total - n_steps as f64 * step > 1e-9 {
        out.push(*points.last().unwrap());
    }
    out
}

/// Source pixel whose ground point, after the ego moves `beta` meters
/// forward, is seen at `pixel`. Equivalently the source ground depth is
/// the target depth plus `beta` at equal lateral offset.
pub fn depth_warp_source(
    pixel: (f64, f64),
    beta: f64,
    cam: &CameraModel,
) -> Result<(f64, f64), BevError> {
    let (x, z_target) = pixel_to_ground(pixel, cam)?;
    let z_source = z_target + beta;
    if z_source <= 1e-12 {
        return Err(BevError::WarpSingularity);
    }
    ground_to_pixel((x, z_source), cam)
}

/// Closed form of `depth_warp_source` obtained by substituting the
/// flat-ground model into itself; used as an internal cross-check.
pub fn depth_warp_source_closed_form(
    pixel: (f64, f64),
    beta: f64,
    cam: &CameraModel,
) -> Result<(f64, f64), BevError> {
    let (m1, n1) = pixel;
    if m1 <= cam.center_row {
        return Err(BevError::AboveHorizon {
            row: m1,
            horizon: cam.center_row,
        });
    }
    let fc = cam.focal * cam.camera_height;
    let denom = fc + m1 * beta - cam.center_row * beta;
    if denom.abs() <= 1e-12 || fc / denom <= 0.0 {
        return Err(BevError::WarpSingularity);
    }
    let m0 = (m1 - cam.center_row) * fc / denom + cam.center_row;
    let n0 = (n1 - cam.center_col) * fc / denom + cam.center_col;
    Ok((m0, n0))
}

/// Result of translating labels by an ego displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslatedLabels {
    pub graph: crate::graph::LaneGraph,
    pub boxes: Vec<crate::objects::OrientedBox>,
    /// Original centerline index of each surviving curve.
    pub curve_origin: Vec<usize>,
    pub dropped_curves: usize,
    pub dropped_boxes: usize,
}

/// Shift ground-truth content `beta` meters closer (the counterpart of
/// warping the image with `depth_warp_source`) and re-clip against the
/// ROI.
///
/// Curves that stay inside the unit square are translated exactly; curves
/// that partially exit are densely sampled, clipped, and refit; curves
/// that fully exit are dropped. An edge survives only when the end of its
/// source curve and the start of its target curve both stay inside the
/// ROI; clipping a curve into several in-ROI runs does not connect the
/// runs (the connection across the gap is undefined, mirroring the
/// ground-truth builder).
pub fn translate_labels(
    graph: &crate::graph::LaneGraph,
    boxes: &[crate::objects::OrientedBox],
    beta: f64,
    roi: &RoiSpec,
) -> TranslatedLabels {
    use crate::curve::{fit_bezier, sample_curve};
    use crate::graph::{merge_junctions, IncidenceMatrix, LaneGraph};

    let dz_norm = -beta / roi.z_extent();
    let delta = Point2::new(0.0, dz_norm);

    // Survivor bookkeeping: old index -> (first fragment, last fragment).
    let mut kept: Vec<Option<(usize, usize)>> = vec![None; graph.len()];
    let mut curves = Vec::new();
    let mut curve_origin = Vec::new();
    let mut kept_start: Vec<bool> = vec![false; graph.len()];
    let mut kept_end: Vec<bool> = vec![false; graph.len()];
    let mut any_refit = false;

    for (idx, curve) in graph.centerlines().iter().enumerate() {
        let shifted = curve.translate(delta);
        if shifted
            .control_points()
            .iter()
            .all(|p| p.in_unit_square())
        {
            let slot = curves.len();
            curves.push(shifted);
            curve_origin.push(idx);
            kept[idx] = Some((slot, slot));
            kept_start[idx] = true;
            kept_end[idx] = true;
            continue;
        }
        // Partial exit: sample in meters, re-clip, refit per fragment.
        any_refit = true;
        let dense = sample_curve(&shifted, 100).expect("fixed count");
        let metric = Polyline::new(
            dense
                .points
                .iter()
                .map(|p| {
                    let (x, z) = bev_denormalize(*p, roi);
                    Point2::new(x, z)
                })
                .collect(),
        );
        let head_in = roi.contains(metric.points[0].x, metric.points[0].y);
        let tail_in = {
            let p = metric.points.last().unwrap();
            roi.contains(p.x, p.y)
        };
        let fragments = clip_resample(&metric, roi).unwrap_or_default();
        let degree = curve.degree();
        let mut first_new = None;
        let mut last_new = None;
        for frag in fragments {
            if frag.len() < degree + 1 {
                continue;
            }
            if let Ok(fit) = fit_bezier(&frag, degree) {
                let slot = curves.len();
                curves.push(fit.clamp_unit());
                curve_origin.push(idx);
                first_new.get_or_insert(slot);
                last_new = Some(slot);
            }
        }
        if let (Some(f), Some(l)) = (first_new, last_new) {
            kept[idx] = Some((f, l));
            kept_start[idx] = head_in;
            kept_end[idx] = tail_in;
        }
    }

    let n = curves.len();
    let mut incidence = IncidenceMatrix::zeros(n);
    for (i, j) in graph.incidence().pairs() {
        if let (Some((_, last_i)), Some((first_j, _))) = (kept[i], kept[j]) {
            if kept_end[i] && kept_start[j] {
                incidence.set(last_i, first_j, true);
            }
        }
    }

    let dropped_curves = graph.len() - kept.iter().filter(|k| k.is_some()).count();
    let mut new_graph = LaneGraph::new(curves, incidence).expect("sides match by construction");
    if any_refit {
        // Refit fragments no longer interpolate shared junction points;
        // snap connected endpoints back together.
        new_graph = merge_junctions(&new_graph);
    }

    let mut out_boxes = Vec::new();
    let mut dropped_boxes = 0usize;
    for b in boxes {
        let moved = b.translated(delta);
        if moved.geometry().center.in_unit_square() {
            out_boxes.push(moved);
        } else {
            dropped_boxes += 1;
        }
    }

    TranslatedLabels {
        graph: new_graph,
        boxes: out_boxes,
        curve_origin,
        dropped_curves,
        dropped_boxes,
    }
}

/// A positional-encoding feature grid of shape
/// `rows x cols x channels`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PeGrid {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    values: Vec<f64>,
}

impl PeGrid {
    fn zeros(rows: usize, cols: usize, channels: usize) -> Self {
        Self {
            rows,
            cols,
            channels,
            values: vec![0.0; rows * cols * channels],
        }
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.values[(row * self.cols + col) * self.channels + channel]
    }

    fn set(&mut self, row: usize, col: usize, channel: usize, v: f64) {
        self.values[(row * self.cols + col) * self.channels + channel] = v;
    }
}

/// Rows within this many feature rows below the horizon keep a zero BEV
/// encoding; depth diverges there and would dominate the cumulative sums.
const HORIZON_GUARD_ROWS: usize = 2;

/// Sinusoidal encoding of a scalar position in [0, 1] across `dim`
/// channels, DETR-style with geometric frequencies.
fn sinusoid(pos: f64, dim: usize, out: &mut [f64]) {
    let scaled = pos * 2.0 * std::f64::consts::PI;
    for i in 0..dim {
        let freq = 10000f64.powf(2.0 * (i / 2) as f64 / dim as f64);
        out[i] = if i % 2 == 0 {
            (scaled / freq).sin()
        } else {
            (scaled / freq).cos()
        };
    }
}

/// Split positional encoding: the first half of the channels carries an
/// image-plane sinusoidal encoding of the feature cell position; the
/// second half carries a BEV encoding built from log-scaled flat-ground
/// coordinates (cumulative-summed, normalized, then made sinusoidal).
/// Rows at or above the horizon (plus a small guard band) have a zero BEV
/// half.
pub fn split_positional_encoding(
    feat_rows: usize,
    feat_cols: usize,
    channels: usize,
    cam: &CameraModel,
) -> Result<PeGrid, BevError> {
    if channels % 2 != 0 {
        return Err(BevError::OddChannels(channels));
    }
    let mut grid = PeGrid::zeros(feat_rows, feat_cols, channels);
    let half = channels / 2;
    let row_dim = half - half / 2;
    let col_dim = half / 2;

    // Image half: normalized cumulative positions of the feature cells.
    let mut row_buf = vec![0.0; row_dim];
    let mut col_buf = vec![0.0; col_dim];
    for r in 0..feat_rows {
        let row_pos = (r as f64 + 1.0) / feat_rows as f64;
        sinusoid(row_pos, row_dim, &mut row_buf);
        for c in 0..feat_cols {
            let col_pos = (c as f64 + 1.0) / feat_cols as f64;
            sinusoid(col_pos, col_dim, &mut col_buf);
            for (k, &v) in row_buf.iter().enumerate() {
                grid.set(r, c, k, v);
            }
            for (k, &v) in col_buf.iter().enumerate() {
                grid.set(r, c, row_dim + k, v);
            }
        }
    }

    // BEV half: log-scaled flat-ground coordinates for valid rows.
    let row_to_pixel = cam.image_height as f64 / feat_rows as f64;
    let col_to_pixel = cam.image_width as f64 / feat_cols as f64;
    let horizon_feat_row = cam.center_row / row_to_pixel;
    let valid_from = (horizon_feat_row.floor() as usize + 1 + HORIZON_GUARD_ROWS).min(feat_rows);

    let mut log_x = vec![vec![0.0; feat_cols]; feat_rows];
    let mut log_z = vec![vec![0.0; feat_cols]; feat_rows];
    for r in valid_from..feat_rows {
        let pixel_row = (r as f64 + 0.5) * row_to_pixel;
        for c in 0..feat_cols {
            let pixel_col = (c as f64 + 0.5) * col_to_pixel;
            let (x, z) = match pixel_to_ground((pixel_row, pixel_col), cam) {
                Ok(g) => g,
                Err(_) => continue,
            };
            // x spans both signs, so use an odd-symmetric log; z is
            // positive below the horizon.
            log_x[r][c] = x.signum() * (1.0 + x.abs()).ln();
            log_z[r][c] = z.max(1e-9).ln();
        }
    }

    // Cumulative sums along each axis over the valid block, normalized to
    // [0, 1] per line, then encoded.
    let bev_row_dim = (channels - half) - (channels - half) / 2;
    let bev_col_dim = (channels - half) / 2;
    let mut zbuf = vec![0.0; bev_row_dim];
    let mut xbuf = vec![0.0; bev_col_dim];

    if valid_from < feat_rows {
        // Depth position: cumulative over rows per column.
        for c in 0..feat_cols {
            let mut cum = Vec::with_capacity(feat_rows - valid_from);
            let mut acc = 0.0;
            for r in valid_from..feat_rows {
                acc += log_z[r][c];
                cum.push(acc);
            }
            let (lo, hi) = cum
                .iter()
                .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let span = if hi > lo { hi - lo } else { 1.0 };
            for (k, r) in (valid_from..feat_rows).enumerate() {
                let pos = (cum[k] - lo) / span;
                sinusoid(pos, bev_row_dim, &mut zbuf);
                for (i, &v) in zbuf.iter().enumerate() {
                    grid.set(r, c, half + i, v);
                }
            }
        }
        // Lateral position: cumulative over columns per row.
        for r in valid_from..feat_rows {
            let mut cum = Vec::with_capacity(feat_cols);
            let mut acc = 0.0;
            for c in 0..feat_cols {
                acc += log_x[r][c];
                cum.push(acc);
            }
            let (lo, hi) = cum
                .iter()
                .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let span = if hi > lo { hi - lo } else { 1.0 };
            for c in 0..feat_cols {
                let pos = (cum[c] - lo) / span;
                sinusoid(pos, bev_col_dim, &mut xbuf);
                for (i, &v) in xbuf.iter().enumerate() {
                    grid.set(r, c, half + bev_row_dim + i, v);
                }
            }
        }
    }

    Ok(grid)
}
