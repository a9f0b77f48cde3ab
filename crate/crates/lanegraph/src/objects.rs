//! Oriented BEV object boxes: the 5-parameter form, corner conversion,
//! exact polygon-clipping IOU, and rasterization of class-probability
//! instances onto a semantic grid.

use crate::geom::Point2;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObjectError {
    #[error("box sides must satisfy long >= short > 0, got long={0}, short={1}")]
    InvalidSides(f64, f64),
    #[error("class distribution sums to {0}, expected 1 within 1e-6")]
    NotADistribution(f64),
    #[error("corner quadrilateral is degenerate (zero area)")]
    DegenerateCorners,
    #[error("grid shapes differ: {0}x{1} vs {2}x{3}")]
    GridShapeMismatch(usize, usize, usize, usize),
    #[error("grid label {0} out of range for {1} classes")]
    LabelOutOfRange(usize, usize),
    #[error("non-finite box parameter")]
    NonFinite,
}

/// Fold an angle into `[0, pi)`; a rectangle's heading is only defined up
/// to a 180-degree flip.
pub fn fold_heading(angle: f64) -> f64 {
    let mut a = angle % PI;
    if a < 0.0 {
        a += PI;
    }
    if a >= PI {
        a = 0.0;
    }
    a
}

/// Center, side lengths, and heading of an oriented rectangle. The
/// heading is the direction of the long side, folded into `[0, pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxGeometry {
    pub center: Point2,
    pub long_side: f64,
    pub short_side: f64,
    pub heading: f64,
}

impl BoxGeometry {
    pub fn new(center: Point2, long_side: f64, short_side: f64, heading: f64) -> Result<Self, ObjectError> {
        if ![long_side, short_side, heading, center.x, center.y]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(ObjectError::NonFinite);
        }
        if !(short_side > 0.0 && long_side >= short_side) {
            return Err(ObjectError::InvalidSides(long_side, short_side));
        }
        Ok(Self {
            center,
            long_side,
            short_side,
            heading: fold_heading(heading),
        })
    }

    pub fn area(&self) -> f64 {
        self.long_side * self.short_side
    }
}

/// A detected or ground-truth object: oriented box plus a class
/// distribution over `C + 1` entries whose last entry is "no detection".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBoxRecord", into = "RawBoxRecord")]
pub struct OrientedBox {
    geometry: BoxGeometry,
    class_probs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawBoxRecord {
    center: Point2,
    long_side: f64,
    short_side: f64,
    heading: f64,
    class_probs: Vec<f64>,
}

impl TryFrom<RawBoxRecord> for OrientedBox {
    type Error = ObjectError;
    fn try_from(r: RawBoxRecord) -> Result<Self, Self::Error> {
        OrientedBox::new(
            BoxGeometry::new(r.center, r.long_side, r.short_side, r.heading)?,
            r.class_probs,
        )
    }
}

impl From<OrientedBox> for RawBoxRecord {
    fn from(b: OrientedBox) -> Self {
        RawBoxRecord {
            center: b.geometry.center,
            long_side: b.geometry.long_side,
            short_side: b.geometry.short_side,
            heading: b.geometry.heading,
            class_probs: b.class_probs,
        }
    }
}

impl OrientedBox {
    pub fn new(geometry: BoxGeometry, class_probs: Vec<f64>) -> Result<Self, ObjectError> {
        let sum: f64 = class_probs.iter().sum();
        if class_probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-6 {
            return Err(ObjectError::NotADistribution(sum));
        }
        Ok(Self {
            geometry,
            class_probs,
        })
    }

    /// One-hot box over `n_classes + 1` channels (last is no-detection).
    pub fn one_hot(geometry: BoxGeometry, class: usize, n_classes: usize) -> Result<Self, ObjectError> {
        if class >= n_classes {
            return Err(ObjectError::LabelOutOfRange(class, n_classes));
        }
        let mut probs = vec![0.0; n_classes + 1];
        probs[class] = 1.0;
        Self::new(geometry, probs)
    }

    pub fn geometry(&self) -> &BoxGeometry {
        &self.geometry
    }

    pub fn class_probs(&self) -> &[f64] {
        &self.class_probs
    }

    /// Most probable channel (the no-detection channel included).
    pub fn class_id(&self) -> usize {
        self.class_probs
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            })
            .0
    }

    /// True when the most probable channel is the trailing no-detection
    /// channel.
    pub fn is_no_detection(&self) -> bool {
        self.class_id() + 1 == self.class_probs.len()
    }

    pub fn translated(&self, delta: Point2) -> OrientedBox {
        let mut out = self.clone();
        out.geometry.center = out.geometry.center + delta;
        out
    }
}

/// Counter-clockwise corner points of an oriented rectangle.
pub fn box_to_corners(geometry: &BoxGeometry) -> [Point2; 4] {
    let u = Point2::new(geometry.heading.cos(), geometry.heading.sin());
    let v = Point2::new(-geometry.heading.sin(), geometry.heading.cos());
    let hu = u * (geometry.long_side / 2.0);
    let hv = v * (geometry.short_side / 2.0);
    let c = geometry.center;
    [c - hu - hv, c + hu - hv, c + hu + hv, c - hu + hv]
}

/// Best-fit box recovered from four corners, with the worst corner
/// reconstruction error as a rectangularity diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxFit {
    pub geometry: BoxGeometry,
    /// Largest distance between an input corner and the corresponding
    /// corner of the fitted rectangle.
    pub max_corner_error: f64,
}

impl BoxFit {
    /// True when the input corners deviate from an exact rectangle by no
    /// more than 1e-3.
    pub fn is_rectangular(&self) -> bool {
        self.max_corner_error <= 1e-3
    }
}

/// Recover center, side lengths, and heading from four corner points
/// given in cyclic order (either winding, any starting corner).
pub fn corners_to_box(corners: &[Point2; 4]) -> Result<BoxFit, ObjectError> {
    let center = (corners[0] + corners[1] + corners[2] + corners[3]) * 0.25;
    let area = polygon_area(corners);
    if area.abs() < 1e-15 || corners.iter().any(|p| !p.is_finite()) {
        return Err(ObjectError::DegenerateCorners);
    }

    // Opposite-edge averages give the two axes.
    let e0 = (corners[1] - corners[0] + (corners[2] - corners[3])) * 0.5;
    let e1 = (corners[2] - corners[1] + (corners[3] - corners[0])) * 0.5;
    let (len_a, len_b) = (e0.norm(), e1.norm());
    if len_a < 1e-12 || len_b < 1e-12 {
        return Err(ObjectError::DegenerateCorners);
    }
    let (long_side, short_side, axis) = if len_a >= len_b {
        (len_a, len_b, e0)
    } else {
        (len_b, len_a, e1)
    };
    let heading = fold_heading(axis.y.atan2(axis.x));
    let geometry = BoxGeometry::new(center, long_side, short_side, heading)?;

    // Rectangularity: compare against the reconstruction under the best
    // cyclic shift and winding.
    let rebuilt = box_to_corners(&geometry);
    let mut best = f64::INFINITY;
    for flip in [false, true] {
        let seq: Vec<Point2> = if flip {
            corners.iter().rev().copied().collect()
        } else {
            corners.to_vec()
        };
        for shift in 0..4 {
            let worst = (0..4)
                .map(|k| rebuilt[k].dist(seq[(k + shift) % 4]))
                .fold(0.0f64, f64::max);
            best = best.min(worst);
        }
    }
    Ok(BoxFit {
        geometry,
        max_corner_error: best,
    })
}

fn polygon_area(points: &[Point2]) -> f64 {
    let n = points.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += points[i].cross(points[(i + 1) % n]);
    }
    acc / 2.0
}

/// Clip `subject` by convex `clip` (Sutherland-Hodgman). Both polygons
/// must be counter-clockwise.
fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        if input.is_empty() {
            break;
        }
        let inside = |p: Point2| (b - a).cross(p - a) >= 0.0;
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = inside(cur);
            let prev_in = inside(prev);
            if cur_in {
                if !prev_in {
                    output.push(segment_line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(segment_line_intersection(prev, cur, a, b));
            }
        }
    }
    output
}

fn segment_line_intersection(p: Point2, q: Point2, a: Point2, b: Point2) -> Point2 {
    let d1 = (b - a).cross(p - a);
    let d2 = (b - a).cross(q - a);
    let t = d1 / (d1 - d2);
    p + (q - p) * t
}

/// Exact intersection-over-union of two oriented boxes via convex polygon
/// clipping.
pub fn oriented_iou(a: &BoxGeometry, b: &BoxGeometry) -> f64 {
    let ca = box_to_corners(a);
    let cb = box_to_corners(b);
    let inter_poly = clip_convex(&ca, &cb);
    let inter = if inter_poly.len() < 3 {
        0.0
    } else {
        polygon_area(&inter_poly).abs()
    };
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Per-cell class probabilities over an `H x W` grid with `C + 1`
/// channels. Row `0` is the nearest depth row; each cell covers an equal
/// slice of the unit square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticGrid {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<f64>,
}

impl SemanticGrid {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            values: vec![0.0; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.values[(row * self.width + col) * self.channels + channel]
    }

    pub(crate) fn set_value(&mut self, row: usize, col: usize, channel: usize, v: f64) {
        self.values[(row * self.width + col) * self.channels + channel] = v;
    }

    fn add(&mut self, row: usize, col: usize, probs: &[f64]) {
        let base = (row * self.width + col) * self.channels;
        for (c, &p) in probs.iter().enumerate() {
            self.values[base + c] += p;
        }
    }

    fn clip_unit(&mut self) {
        for v in &mut self.values {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Cell center in normalized coordinates.
    pub fn cell_center(&self, row: usize, col: usize) -> Point2 {
        Point2::new(
            (col as f64 + 0.5) / self.width as f64,
            (row as f64 + 0.5) / self.height as f64,
        )
    }
}

/// Paint each box's class-probability vector onto every cell whose center
/// falls inside the box, sum over boxes, and clamp each channel to
/// `[0, 1]`.
pub fn rasterize_instances(boxes: &[OrientedBox], height: usize, width: usize) -> SemanticGrid {
    let channels = boxes
        .iter()
        .map(|b| b.class_probs().len())
        .max()
        .unwrap_or(1);
    let mut grid = SemanticGrid::zeros(height, width, channels);
    for b in boxes {
        let g = b.geometry();
        let u = Point2::new(g.heading.cos(), g.heading.sin());
        let v = Point2::new(-g.heading.sin(), g.heading.cos());
        // Scan only the bounding rows/cols of the corner hull.
        let corners = box_to_corners(g);
        let (min_x, max_x) = corners
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)));
        let (min_y, max_y) = corners
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
        let col_lo = ((min_x * width as f64 - 0.5).floor().max(0.0)) as usize;
        let col_hi = ((max_x * width as f64 + 0.5).ceil() as usize).min(width);
        let row_lo = ((min_y * height as f64 - 0.5).floor().max(0.0)) as usize;
        let row_hi = ((max_y * height as f64 + 0.5).ceil() as usize).min(height);
        for row in row_lo..row_hi {
            for col in col_lo..col_hi {
                let d = grid.cell_center(row, col) - g.center;
                if d.dot(u).abs() <= g.long_side / 2.0 && d.dot(v).abs() <= g.short_side / 2.0 {
                    grid.add(row, col, b.class_probs());
                }
            }
        }
    }
    grid.clip_unit();
    grid
}

/// Per-cell class labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassGrid {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<usize>,
}

impl ClassGrid {
    pub fn from_labels(height: usize, width: usize, labels: Vec<usize>) -> Self {
        assert_eq!(labels.len(), height * width);
        Self {
            height,
            width,
            labels,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> usize {
        self.labels[row * self.width + col]
    }
}

/// Per-cell argmax channel. Cells with no mass anywhere map to the
/// trailing no-detection channel; other ties resolve to the lowest
/// channel index.
pub fn grid_argmax(grid: &SemanticGrid) -> ClassGrid {
    let background = grid.channels() - 1;
    let mut labels = Vec::with_capacity(grid.height() * grid.width());
    for row in 0..grid.height() {
        for col in 0..grid.width() {
            let mut best = 0usize;
            let mut best_v = f64::NEG_INFINITY;
            let mut total = 0.0;
            for c in 0..grid.channels() {
                let v = grid.get(row, col, c);
                total += v;
                if v > best_v {
                    best_v = v;
                    best = c;
                }
            }
            labels.push(if total == 0.0 { background } else { best });
        }
    }
    ClassGrid::from_labels(grid.height(), grid.width(), labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geom(cx: f64, cy: f64, long: f64, short: f64, heading: f64) -> BoxGeometry {
        BoxGeometry::new(Point2::new(cx, cy), long, short, heading).unwrap()
    }

    #[test]
    fn corners_of_axis_aligned_box() {
        let g = geom(0.5, 0.5, 0.2, 0.1, 0.0);
        let c = box_to_corners(&g);
        let expect = [
            Point2::new(0.4, 0.45),
            Point2::new(0.6, 0.45),
            Point2::new(0.6, 0.55),
            Point2::new(0.4, 0.55),
        ];
        for (p, q) in c.iter().zip(&expect) {
            assert_relative_eq!(p.x, q.x, epsilon = 1e-12);
            assert_relative_eq!(p.y, q.y, epsilon = 1e-12);
        }
        // Centroid equals center, edges equal sides.
        let centroid = (c[0] + c[1] + c[2] + c[3]) * 0.25;
        assert_relative_eq!(centroid.x, 0.5, epsilon = 1e-12);
        assert_relative_eq!(c[0].dist(c[1]), 0.2, epsilon = 1e-12);
        assert_relative_eq!(c[1].dist(c[2]), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn quarter_turn_swaps_extents() {
        let g0 = geom(0.5, 0.5, 0.2, 0.1, 0.0);
        let g90 = geom(0.5, 0.5, 0.2, 0.1, std::f64::consts::FRAC_PI_2);
        let c0 = box_to_corners(&g0);
        let c90 = box_to_corners(&g90);
        let spread = |pts: &[Point2; 4]| {
            let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
            (
                xs.iter().cloned().fold(f64::MIN, f64::max) - xs.iter().cloned().fold(f64::MAX, f64::min),
                ys.iter().cloned().fold(f64::MIN, f64::max) - ys.iter().cloned().fold(f64::MAX, f64::min),
            )
        };
        let (w0, h0) = spread(&c0);
        let (w90, h90) = spread(&c90);
        assert_relative_eq!(w0, h90, epsilon = 1e-12);
        assert_relative_eq!(h0, w90, epsilon = 1e-12);
    }

    #[test]
    fn corners_roundtrip_and_rotation_order() {
        let unit = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let fit = corners_to_box(&unit).unwrap();
        assert_relative_eq!(fit.geometry.center.x, 0.5, epsilon = 1e-12);
        assert_relative_eq!(fit.geometry.long_side, 1.0, epsilon = 1e-12);
        assert_relative_eq!(fit.geometry.short_side, 1.0, epsilon = 1e-12);
        assert_relative_eq!(fit.geometry.heading, 0.0, epsilon = 1e-12);
        assert!(fit.is_rectangular());

        // Same box from a rotated listing order.
        let rotated = [unit[2], unit[3], unit[0], unit[1]];
        let fit2 = corners_to_box(&rotated).unwrap();
        assert_relative_eq!(fit2.geometry.center.x, fit.geometry.center.x, epsilon = 1e-12);
        assert_relative_eq!(fit2.geometry.long_side, fit.geometry.long_side, epsilon = 1e-12);

        // A rectangle at 30 degrees comes back with heading pi/6.
        let g = geom(0.3, 0.4, 0.4, 0.2, PI / 6.0);
        let fit3 = corners_to_box(&box_to_corners(&g)).unwrap();
        assert_relative_eq!(fit3.geometry.heading, PI / 6.0, epsilon = 1e-9);
        assert!(fit3.max_corner_error < 1e-9);

        let degenerate = [Point2::new(0.1, 0.1); 4];
        assert!(matches!(
            corners_to_box(&degenerate),
            Err(ObjectError::DegenerateCorners)
        ));
    }

    #[test]
    fn iou_identity_disjoint_and_half_offset() {
        let a = geom(0.0, 0.0, 1.0, 1.0, 0.0);
        assert_relative_eq!(oriented_iou(&a, &a), 1.0, epsilon = 1e-12);

        let far = geom(5.0, 5.0, 1.0, 1.0, 0.3);
        assert_eq!(oriented_iou(&a, &far), 0.0);

        // Two unit squares offset by 0.5: intersection 0.5, union 1.5.
        let b = geom(0.5, 0.0, 1.0, 1.0, 0.0);
        assert_relative_eq!(oriented_iou(&a, &b), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn iou_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = geom(
                rng.random_range(0.3..0.7),
                rng.random_range(0.3..0.7),
                rng.random_range(0.1..0.4),
                rng.random_range(0.05..0.1),
                rng.random_range(0.0..PI),
            );
            let b = geom(
                rng.random_range(0.3..0.7),
                rng.random_range(0.3..0.7),
                rng.random_range(0.1..0.4),
                rng.random_range(0.05..0.1),
                rng.random_range(0.0..PI),
            );
            let exact = oriented_iou(&a, &b);
            let mc = monte_carlo_iou(&a, &b, 200_000, &mut rng);
            assert!(
                (exact - mc).abs() < 2e-2,
                "exact {exact} vs monte carlo {mc}"
            );
        }
    }

    pub fn monte_carlo_iou(
        a: &BoxGeometry,
        b: &BoxGeometry,
        samples: usize,
        rng: &mut impl Rng,
    ) -> f64 {
        let corners: Vec<Point2> = box_to_corners(a)
            .into_iter()
            .chain(box_to_corners(b))
            .collect();
        let (min_x, max_x) = corners
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)));
        let (min_y, max_y) = corners
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
        let inside = |g: &BoxGeometry, p: Point2| {
            let u = Point2::new(g.heading.cos(), g.heading.sin());
            let v = Point2::new(-g.heading.sin(), g.heading.cos());
            let d = p - g.center;
            d.dot(u).abs() <= g.long_side / 2.0 && d.dot(v).abs() <= g.short_side / 2.0
        };
        let (mut in_both, mut in_either) = (0u64, 0u64);
        for _ in 0..samples {
            let p = Point2::new(
                rng.random_range(min_x..max_x),
                rng.random_range(min_y..max_y),
            );
            let ia = inside(a, p);
            let ib = inside(b, p);
            if ia && ib {
                in_both += 1;
            }
            if ia || ib {
                in_either += 1;
            }
        }
        if in_either == 0 {
            0.0
        } else {
            in_both as f64 / in_either as f64
        }
    }

    #[test]
    fn rasterize_cases() {
        let empty = rasterize_instances(&[], 8, 8);
        assert!((0..8).all(|r| (0..8).all(|c| empty.get(r, c, 0) == 0.0)));

        // One-hot box paints exactly its channel.
        let b = OrientedBox::one_hot(geom(0.5, 0.5, 0.5, 0.25, 0.0), 1, 3).unwrap();
        let g = rasterize_instances(&[b.clone()], 16, 16);
        let mut inside_cells = 0;
        for r in 0..16 {
            for c in 0..16 {
                let v1 = g.get(r, c, 1);
                assert!(v1 == 0.0 || v1 == 1.0);
                assert_eq!(g.get(r, c, 0), 0.0);
                assert_eq!(g.get(r, c, 3), 0.0);
                if v1 == 1.0 {
                    inside_cells += 1;
                }
            }
        }
        // 0.5 x 0.25 of a 16x16 grid is 8 x 4 cells.
        assert_eq!(inside_cells, 32);

        // Overlapping soft boxes clip at 1.
        let soft = |p: f64| {
            OrientedBox::new(geom(0.5, 0.5, 0.5, 0.25, 0.0), vec![p, 0.0, 1.0 - p]).unwrap()
        };
        let g = rasterize_instances(&[soft(0.6), soft(0.6)], 16, 16);
        assert_eq!(g.get(8, 8, 0), 1.0);
    }

    #[test]
    fn rasterized_cell_count_tracks_area() {
        let g = geom(0.5, 0.5, 0.4, 0.2, 0.7);
        let b = OrientedBox::one_hot(g, 0, 2).unwrap();
        let grid = rasterize_instances(&[b], 64, 64);
        let cells = (0..64)
            .flat_map(|r| (0..64).map(move |c| (r, c)))
            .filter(|&(r, c)| grid.get(r, c, 0) > 0.0)
            .count() as f64;
        let cell_area = 1.0 / (64.0 * 64.0);
        let expected = g.area() / cell_area;
        let perimeter_cells = 2.0 * (g.long_side + g.short_side) * 64.0;
        assert!(
            (cells - expected).abs() <= perimeter_cells,
            "cells {cells} vs expected {expected} +- {perimeter_cells}"
        );
    }

    #[test]
    fn argmax_cases() {
        let b = OrientedBox::one_hot(geom(0.5, 0.5, 0.6, 0.4, 0.0), 0, 2).unwrap();
        let grid = rasterize_instances(&[b], 8, 8);
        let labels = grid_argmax(&grid);
        assert_eq!(labels.get(4, 4), 0);
        assert_eq!(labels.get(0, 0), 2); // empty cell -> background

        let zeros = SemanticGrid::zeros(2, 2, 3);
        let labels = grid_argmax(&zeros);
        assert!(labels.labels.iter().all(|&l| l == 2));

        let mut g = SemanticGrid::zeros(1, 1, 3);
        g.add(0, 0, &[0.2, 0.7, 0.1]);
        assert_eq!(grid_argmax(&g).get(0, 0), 1);
    }

    #[test]
    fn box_validation() {
        assert!(BoxGeometry::new(Point2::new(0.5, 0.5), 0.1, 0.2, 0.0).is_err());
        assert!(BoxGeometry::new(Point2::new(0.5, 0.5), 0.2, 0.0, 0.0).is_err());
        assert!(OrientedBox::new(geom(0.5, 0.5, 0.2, 0.1, 0.0), vec![0.5, 0.4]).is_err());
        // Heading folds into [0, pi).
        let g = geom(0.5, 0.5, 0.2, 0.1, PI + 0.3);
        assert_relative_eq!(g.heading, 0.3, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(
            (ax, ay, bx, by) in (0.2f64..0.8, 0.2f64..0.8, 0.2f64..0.8, 0.2f64..0.8),
            (la, sa, lb, sb) in (0.05f64..0.4, 0.02f64..0.05, 0.05f64..0.4, 0.02f64..0.05),
            (ha, hb) in (0.0f64..PI, 0.0f64..PI),
        ) {
            let a = geom(ax, ay, la.max(sa), sa.min(la), ha);
            let b = geom(bx, by, lb.max(sb), sb.min(lb), hb);
            let ab = oriented_iou(&a, &b);
            let ba = oriented_iou(&b, &a);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((ab - ba).abs() < 1e-12);
        }

        #[test]
        fn iou_invariant_under_rigid_motion(
            (cx, cy) in (0.3f64..0.7, 0.3f64..0.7),
            (dx, dy, rot) in (-0.2f64..0.2, -0.2f64..0.2, 0.0f64..PI),
        ) {
            let a = geom(cx, cy, 0.3, 0.1, 0.4);
            let b = geom(cx + 0.05, cy - 0.02, 0.25, 0.08, 1.1);
            let before = oriented_iou(&a, &b);
            let transform = |g: &BoxGeometry| {
                let (s, c) = (rot.sin(), rot.cos());
                let rotate = |p: Point2| Point2::new(p.x * c - p.y * s, p.x * s + p.y * c);
                BoxGeometry::new(
                    rotate(g.center) + Point2::new(dx, dy),
                    g.long_side,
                    g.short_side,
                    g.heading + rot,
                ).unwrap()
            };
            let after = oriented_iou(&transform(&a), &transform(&b));
            prop_assert!((before - after).abs() < 1e-9);
        }

        #[test]
        fn corners_roundtrip_random_boxes(
            (cx, cy) in (0.2f64..0.8, 0.2f64..0.8),
            (long, short) in (0.1f64..0.5, 0.02f64..0.1),
            heading in 0.0f64..PI,
        ) {
            let g = geom(cx, cy, long.max(short), short.min(long), heading);
            let fit = corners_to_box(&box_to_corners(&g)).unwrap();
            prop_assert!(fit.max_corner_error < 1e-9);
            prop_assert!((fit.geometry.center.x - g.center.x).abs() < 1e-9);
            prop_assert!((fit.geometry.long_side - g.long_side).abs() < 1e-9);
            prop_assert!((fit.geometry.short_side - g.short_side).abs() < 1e-9);
            // Heading matches modulo pi (exact flip degeneracy for squares).
            let dh = (fit.geometry.heading - g.heading).abs();
            prop_assert!(dh < 1e-9 || (dh - PI).abs() < 1e-9);
        }
    }
}
