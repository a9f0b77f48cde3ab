//! Ground-truth construction: metric polylines plus declared connectivity
//! go in, a validated normalized scene comes out.
//!
//! The pipeline per polyline: resample at the BEV resolution, discard
//! out-of-ROI points, normalize each surviving run, and fit Bezier
//! control points. The incidence matrix is rebuilt over the surviving
//! segments; a declared connection survives only when the touching
//! endpoints themselves survive, and a polyline split by the ROI into
//! several runs gets no edge across the gap. Fitted junction endpoints
//! are snapped together afterwards so ground-truth graphs satisfy exact
//! endpoint coincidence.

use crate::bev::{clip_resample, CameraModel, RoiSpec};
use crate::curve::{fit_bezier, Polyline};
use crate::geom::Point2;
use crate::graph::{merge_junctions, IncidenceMatrix, LaneGraph};
use crate::harness::scene::{SceneRecord, TrafficSide};
use crate::objects::{BoxGeometry, OrientedBox};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Bezier control points per centerline in ground truth.
pub const GT_CONTROL_POINTS: usize = 3;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("connection ({0}, {1}) refers outside the {2} input polylines")]
    ConnectionOutOfRange(usize, usize, usize),
    #[error("input polyline {index} is degenerate: {reason}")]
    BadPolyline { index: usize, reason: String },
}

/// Non-fatal findings from a build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuildDiagnostic {
    /// The whole scene fell outside the ROI.
    EmptyScene,
    /// A polyline produced several in-ROI runs; no edges connect them.
    FragmentedPolyline { polyline: usize, fragments: usize },
    /// A run was too short to fit the requested curve degree.
    DroppedSegment { polyline: usize, points: usize },
    /// A declared connection whose endpoint region was clipped away.
    DroppedConnection { from: usize, to: usize },
    /// A box whose center left the ROI.
    DroppedBox { index: usize },
}

impl fmt::Display for BuildDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildDiagnostic::EmptyScene => write!(f, "no content intersects the ROI"),
            BuildDiagnostic::FragmentedPolyline { polyline, fragments } => write!(
                f,
                "polyline {polyline} split into {fragments} in-ROI runs; cross-gap connections dropped"
            ),
            BuildDiagnostic::DroppedSegment { polyline, points } => write!(
                f,
                "polyline {polyline}: run with {points} points is too short to fit"
            ),
            BuildDiagnostic::DroppedConnection { from, to } => {
                write!(f, "connection ({from}, {to}) lost to ROI clipping")
            }
            BuildDiagnostic::DroppedBox { index } => {
                write!(f, "box {index} centered outside the ROI")
            }
        }
    }
}

/// An object annotation in meters, prior to normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawBox {
    /// Center (x, z) in meters.
    pub center: [f64; 2],
    pub long_side: f64,
    pub short_side: f64,
    pub heading: f64,
    /// Real class index (the no-detection channel is appended on
    /// normalization).
    pub class: usize,
}

/// Raw annotations for one frame: metric centerline polylines, declared
/// connectivity over them, and metric boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScene {
    pub id: String,
    /// Polylines in meters, each a list of `[x, z]` points.
    pub centerlines: Vec<Vec<[f64; 2]>>,
    /// Declared end-to-start connections between polylines.
    #[serde(default)]
    pub connections: Vec<[usize; 2]>,
    #[serde(default)]
    pub boxes: Vec<RawBox>,
    #[serde(default)]
    pub traffic_side: TrafficSide,
}

/// A set of raw scenes; the input format of the `fit` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSceneSet {
    pub format_version: u32,
    pub camera: CameraModel,
    pub roi: RoiSpec,
    pub scenes: Vec<RawScene>,
    /// Number of real object classes.
    #[serde(default = "default_classes")]
    pub n_classes: usize,
}

fn default_classes() -> usize {
    6
}

/// Build one normalized ground-truth scene.
pub fn build_ground_truth(
    raw: &RawScene,
    camera: &CameraModel,
    roi: &RoiSpec,
    n_classes: usize,
) -> Result<(SceneRecord, Vec<BuildDiagnostic>), BuildError> {
    build_with_degree(raw, camera, roi, n_classes, GT_CONTROL_POINTS - 1)
}

/// Build with an explicit Bezier degree (the `fit` subcommand's
/// `--degree`).
pub fn build_with_degree(
    raw: &RawScene,
    camera: &CameraModel,
    roi: &RoiSpec,
    n_classes: usize,
    degree: usize,
) -> Result<(SceneRecord, Vec<BuildDiagnostic>), BuildError> {
    let n_in = raw.centerlines.len();
    for c in &raw.connections {
        if c[0] >= n_in || c[1] >= n_in {
            return Err(BuildError::ConnectionOutOfRange(c[0], c[1], n_in));
        }
    }

    let mut diagnostics = Vec::new();
    let mut curves = Vec::new();
    // Per input polyline: the fitted curve carrying its original start
    // point and the one carrying its original end point, when they
    // survived clipping.
    let mut head_fragment: Vec<Option<usize>> = vec![None; n_in];
    let mut tail_fragment: Vec<Option<usize>> = vec![None; n_in];

    for (idx, raw_line) in raw.centerlines.iter().enumerate() {
        if raw_line.len() < 2 {
            return Err(BuildError::BadPolyline {
                index: idx,
                reason: format!("{} points", raw_line.len()),
            });
        }
        let metric = Polyline::new(raw_line.iter().map(|p| Point2::new(p[0], p[1])).collect());
        let head_in = roi.contains(metric.points[0].x, metric.points[0].y);
        let last = metric.points.last().unwrap();
        let tail_in = roi.contains(last.x, last.y);

        let runs = clip_resample(&metric, roi).map_err(|e| BuildError::BadPolyline {
            index: idx,
            reason: e.to_string(),
        })?;
        let n_runs = runs.len();
        if n_runs > 1 {
            diagnostics.push(BuildDiagnostic::FragmentedPolyline {
                polyline: idx,
                fragments: n_runs,
            });
        }
        for (k, run) in runs.into_iter().enumerate() {
            if run.len() < degree + 1 {
                diagnostics.push(BuildDiagnostic::DroppedSegment {
                    polyline: idx,
                    points: run.len(),
                });
                continue;
            }
            match fit_bezier(&run, degree) {
                Ok(curve) => {
                    let slot = curves.len();
                    curves.push(curve.clamp_unit());
                    if k == 0 && head_in {
                        head_fragment[idx] = Some(slot);
                    }
                    if k == n_runs - 1 && tail_in {
                        tail_fragment[idx] = Some(slot);
                    }
                }
                Err(_) => diagnostics.push(BuildDiagnostic::DroppedSegment {
                    polyline: idx,
                    points: run.len(),
                }),
            }
        }
    }

    let n_out = curves.len();
    let mut incidence = IncidenceMatrix::zeros(n_out);
    for c in &raw.connections {
        let (from, to) = (c[0], c[1]);
        match (tail_fragment[from], head_fragment[to]) {
            (Some(a), Some(b)) => incidence.set(a, b, true),
            _ => diagnostics.push(BuildDiagnostic::DroppedConnection { from, to }),
        }
    }

    let graph = LaneGraph::new(curves, incidence).expect("matching sides by construction");
    // Least-squares fits do not interpolate the shared raw endpoints, so
    // snap connected endpoints to make coincidence exact.
    let graph = merge_junctions(&graph);

    let mut objects = Vec::new();
    for (index, b) in raw.boxes.iter().enumerate() {
        match normalize_box(b, roi, n_classes) {
            Some(ob) => objects.push(ob),
            None => diagnostics.push(BuildDiagnostic::DroppedBox { index }),
        }
    }

    if graph.is_empty() && objects.is_empty() && (!raw.centerlines.is_empty() || !raw.boxes.is_empty())
    {
        diagnostics.push(BuildDiagnostic::EmptyScene);
    }

    Ok((
        SceneRecord {
            id: raw.id.clone(),
            camera: *camera,
            roi: *roi,
            graph,
            objects,
            traffic_side: raw.traffic_side,
        },
        diagnostics,
    ))
}

/// Metric box to normalized box. The center maps through the ROI affine;
/// side lengths scale by the mean of the two axis scales, since a rotated
/// rectangle has no exact image under an anisotropic map.
fn normalize_box(b: &RawBox, roi: &RoiSpec, n_classes: usize) -> Option<OrientedBox> {
    if !roi.contains(b.center[0], b.center[1]) {
        return None;
    }
    let center = crate::bev::bev_normalize((b.center[0], b.center[1]), roi).ok()?;
    let scale = 0.5 * (1.0 / roi.x_extent() + 1.0 / roi.z_extent());
    let long = b.long_side * scale;
    let short = b.short_side * scale;
    let geometry = BoxGeometry::new(center, long.max(short), short.min(long), b.heading).ok()?;
    OrientedBox::one_hot(geometry, b.class, n_classes).ok()
}
