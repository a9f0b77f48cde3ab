//! Structured lane-graph toolkit for bird's-eye-view traffic scenes.
//!
//! A local road network is modeled as a directed graph whose vertices are
//! lane centerlines (2D Bezier curves in normalized BEV coordinates) and
//! whose incidence matrix records end-to-start connectivity in traffic
//! direction. This crate provides:
//!
//! - **curve** — Bezier evaluation, Bernstein basis matrices,
//!   least-squares control-point fitting, dense sampling, and the
//!   direction-sensitive control-point distance.
//! - **graph** — the lane graph itself, invariant validation, junction
//!   merging, and reachability.
//! - **assign** — Hungarian assignment, the evaluation-time min-L1 match,
//!   and the matching-loss building blocks.
//! - **metrics** — threshold-swept precision/recall on matched
//!   centerlines, detection ratio, the connectivity metric,
//!   IOU-thresholded object PR, and semantic-grid mean IOU.
//! - **bev** — flat-ground camera projection, ROI normalization, polyline
//!   clip/resample, the depthwise-motion warp, and split positional
//!   encoding.
//! - **objects** — 5-parameter oriented boxes, corner conversion, exact
//!   oriented IOU, and instance rasterization.
//! - **harness** — scene files, ground-truth construction, synthetic
//!   scenes, the dataset evaluation driver, SVG rendering, and the CLI.
//!
//! Each capability has a runnable example under `examples/`; the
//! `lanegraph` binary exposes the file-based pipeline
//! (`synth` / `fit` / `merge` / `eval` / `render`).

pub mod assign;
pub mod bev;
pub mod curve;
pub mod geom;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod objects;

pub use assign::{hungarian, match_min_l1, CostMatrix, LossConfig, MatchMap};
pub use bev::{bev_normalize, clip_resample, pixel_to_ground, CameraModel, RoiSpec};
pub use curve::{eval_bezier, fit_bezier, sample_curve, BezierCurve, Polyline};
pub use geom::Point2;
pub use graph::{connected_pairs, merge_junctions, validate, LaneGraph};
pub use metrics::{detection_ratio, lane_pr_curve, LaneMetricReport, PRPoint};
pub use objects::{oriented_iou, BoxGeometry, OrientedBox, SemanticGrid};
