//! Deterministic SVG rendering of scenes: ground truth in blue,
//! predictions in orange, start points green, end points red, connected
//! endpoints marked yellow, objects as oriented rectangles.

use crate::curve::{sample_curve, BezierCurve};
use crate::geom::Point2;
use crate::harness::scene::SceneRecord;
use crate::objects::box_to_corners;
use std::fmt::Write as _;
use std::path::Path;

const CANVAS_W: f64 = 500.0;
const CANVAS_H: f64 = 490.0;
const MARGIN: f64 = 10.0;

const GT_COLOR: &str = "#2b6cb0";
const PRED_COLOR: &str = "#dd6b20";
const GT_BOX_COLOR: &str = "#2c7a7b";
const PRED_BOX_COLOR: &str = "#c05621";

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

/// Normalized point to canvas coordinates; depth grows upward.
fn canvas(p: Point2) -> (f64, f64) {
    (
        MARGIN + p.x * CANVAS_W,
        MARGIN + (1.0 - p.y) * CANVAS_H,
    )
}

fn path_data(curve: &BezierCurve) -> String {
    let pts = curve.control_points();
    let (x0, y0) = canvas(pts[0]);
    let mut d = format!("M {} {}", fmt(x0), fmt(y0));
    match pts.len() {
        2 => {
            let (x, y) = canvas(pts[1]);
            let _ = write!(d, " L {} {}", fmt(x), fmt(y));
        }
        3 => {
            let (cx, cy) = canvas(pts[1]);
            let (x, y) = canvas(pts[2]);
            let _ = write!(d, " Q {} {} {} {}", fmt(cx), fmt(cy), fmt(x), fmt(y));
        }
        4 => {
            let (c1x, c1y) = canvas(pts[1]);
            let (c2x, c2y) = canvas(pts[2]);
            let (x, y) = canvas(pts[3]);
            let _ = write!(
                d,
                " C {} {} {} {} {} {}",
                fmt(c1x),
                fmt(c1y),
                fmt(c2x),
                fmt(c2y),
                fmt(x),
                fmt(y)
            );
        }
        _ => {
            // Higher degrees are flattened.
            for p in sample_curve(curve, 32).expect("fixed count").points.iter().skip(1) {
                let (x, y) = canvas(*p);
                let _ = write!(d, " L {} {}", fmt(x), fmt(y));
            }
        }
    }
    d
}

fn render_graph(out: &mut String, scene: &SceneRecord, color: &str, dash: Option<&str>) {
    let dash_attr = dash
        .map(|d| format!(" stroke-dasharray=\"{d}\""))
        .unwrap_or_default();
    for curve in scene.graph.centerlines() {
        let _ = writeln!(
            out,
            "  <path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"{} />",
            path_data(curve),
            color,
            dash_attr
        );
    }
    // Connection markers at shared endpoints.
    for (i, j) in scene.graph.incidence().pairs() {
        let a = scene.graph.centerlines()[i].end();
        let b = scene.graph.centerlines()[j].start();
        let (x, y) = canvas(a.lerp(b, 0.5));
        let _ = writeln!(
            out,
            "  <circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"gold\" stroke=\"black\" stroke-width=\"0.5\" />",
            fmt(x),
            fmt(y)
        );
    }
    // Start and end dots drawn after paths so they stay visible.
    for curve in scene.graph.centerlines() {
        let (sx, sy) = canvas(curve.start());
        let (ex, ey) = canvas(curve.end());
        let _ = writeln!(
            out,
            "  <circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"green\" />",
            fmt(sx),
            fmt(sy)
        );
        let _ = writeln!(
            out,
            "  <circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"red\" />",
            fmt(ex),
            fmt(ey)
        );
    }
}

fn render_boxes(out: &mut String, scene: &SceneRecord, color: &str) {
    for b in &scene.objects {
        let corners = box_to_corners(b.geometry());
        let pts: Vec<String> = corners
            .iter()
            .map(|&c| {
                let (x, y) = canvas(c);
                format!("{},{}", fmt(x), fmt(y))
            })
            .collect();
        let _ = writeln!(
            out,
            "  <polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.25\" stroke=\"{}\" stroke-width=\"1\" />",
            pts.join(" "),
            color,
            color
        );
    }
}

/// Render the scene (and optionally a prediction overlay) to a string.
pub fn render_to_string(scene: &SceneRecord, pred: Option<&SceneRecord>) -> String {
    let width = CANVAS_W + 2.0 * MARGIN;
    let height = CANVAS_H + 2.0 * MARGIN;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(out, "  <title>{}</title>", scene.id);
    let _ = writeln!(
        out,
        "  <rect x=\"{m}\" y=\"{m}\" width=\"{CANVAS_W}\" height=\"{CANVAS_H}\" fill=\"white\" stroke=\"#444\" stroke-width=\"1\" />",
        m = MARGIN
    );
    render_boxes(&mut out, scene, GT_BOX_COLOR);
    if let Some(p) = pred {
        render_boxes(&mut out, p, PRED_BOX_COLOR);
    }
    render_graph(&mut out, scene, GT_COLOR, None);
    if let Some(p) = pred {
        render_graph(&mut out, p, PRED_COLOR, Some("5 3"));
    }
    out.push_str("</svg>\n");
    out
}

/// Render to a file.
pub fn render_svg(
    scene: &SceneRecord,
    pred: Option<&SceneRecord>,
    path: &Path,
) -> Result<(), crate::harness::scene::SceneIoError> {
    let text = render_to_string(scene, pred);
    std::fs::write(path, text).map_err(|source| crate::harness::scene::SceneIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bev::{CameraModel, RoiSpec};
    use crate::graph::{merge_junctions, IncidenceMatrix, LaneGraph};
    use crate::harness::scene::SceneRecord;

    fn scene_with(graph: LaneGraph) -> SceneRecord {
        SceneRecord {
            id: "svg-test".into(),
            camera: CameraModel::default_paper(),
            roi: RoiSpec::default(),
            graph,
            objects: Vec::new(),
            traffic_side: Default::default(),
        }
    }

    #[test]
    fn empty_scene_renders_frame_only() {
        let svg = render_to_string(&scene_with(LaneGraph::empty()), None);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("<rect"));
        assert!(!svg.contains("<path"));
    }

    #[test]
    fn one_curve_one_path_two_dots() {
        let curve = BezierCurve::new(vec![
            Point2::new(0.2, 0.1),
            Point2::new(0.3, 0.5),
            Point2::new(0.4, 0.9),
        ])
        .unwrap();
        let svg = render_to_string(&scene_with(LaneGraph::disconnected(vec![curve])), None);
        assert_eq!(svg.matches("<path").count(), 1);
        assert_eq!(svg.matches("fill=\"green\"").count(), 1);
        assert_eq!(svg.matches("fill=\"red\"").count(), 1);
    }

    #[test]
    fn merged_render_differs_only_at_junctions() {
        let a = BezierCurve::new(vec![
            Point2::new(0.5, 0.1),
            Point2::new(0.5, 0.3),
            Point2::new(0.50, 0.50),
        ])
        .unwrap();
        let b = BezierCurve::new(vec![
            Point2::new(0.52, 0.50),
            Point2::new(0.55, 0.7),
            Point2::new(0.6, 0.9),
        ])
        .unwrap();
        let graph = LaneGraph::new(
            vec![a, b],
            IncidenceMatrix::from_pairs(2, &[(0, 1)]).unwrap(),
        )
        .unwrap();
        let merged = merge_junctions(&graph);

        let before = render_to_string(&scene_with(graph), None);
        let after = render_to_string(&scene_with(merged), None);
        assert_ne!(before, after);
        // Lines not mentioning the junction endpoints are unchanged.
        let changed: Vec<(&str, &str)> = before
            .lines()
            .zip(after.lines())
            .filter(|(x, y)| x != y)
            .collect();
        assert!(!changed.is_empty());
        for (x, _) in &changed {
            assert!(x.contains("path") || x.contains("circle"));
        }
    }

    #[test]
    fn deterministic_output() {
        let curve = BezierCurve::new(vec![Point2::new(0.1, 0.1), Point2::new(0.9, 0.9)]).unwrap();
        let s = scene_with(LaneGraph::disconnected(vec![curve]));
        assert_eq!(render_to_string(&s, None), render_to_string(&s, None));
    }
}
