//! Deterministic synthetic scenes for testing and benchmarking the
//! metrics: plausible multi-lane roads with forks, plus a corrupted copy
//! standing in for a model prediction.

use crate::bev::{CameraModel, RoiSpec};
use crate::curve::BezierCurve;
use crate::geom::Point2;
use crate::graph::{IncidenceMatrix, LaneGraph};
use crate::harness::scene::{SceneRecord, TrafficSide};
use crate::objects::{BoxGeometry, OrientedBox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Controls for scene generation and prediction corruption. All rates are
/// probabilities in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Inclusive range of lane chains per scene.
    pub min_lanes: usize,
    pub max_lanes: usize,
    /// Chance that a chain ends in a two-way fork.
    pub junction_rate: f64,
    /// Standard deviation of Gaussian control-point noise on predictions.
    pub noise_sigma: f64,
    /// Chance of dropping each centerline from the prediction.
    pub drop_rate: f64,
    /// Chance of adding a spurious centerline per real one.
    pub false_positive_rate: f64,
    /// Chance of flipping each off-diagonal incidence bit.
    pub incidence_flip_rate: f64,
    /// Objects per scene.
    pub min_objects: usize,
    pub max_objects: usize,
    /// Real object classes.
    pub n_classes: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            min_lanes: 4,
            max_lanes: 10,
            junction_rate: 0.35,
            noise_sigma: 0.01,
            drop_rate: 0.1,
            false_positive_rate: 0.05,
            incidence_flip_rate: 0.002,
            min_objects: 1,
            max_objects: 6,
            n_classes: 6,
        }
    }
}

impl SynthConfig {
    /// A clean copy: the prediction equals the ground truth.
    pub fn noiseless(mut self) -> Self {
        self.noise_sigma = 0.0;
        self.drop_rate = 0.0;
        self.false_positive_rate = 0.0;
        self.incidence_flip_rate = 0.0;
        self
    }
}

fn gaussian(rng: &mut impl Rng, sigma: f64) -> f64 {
    // Box-Muller transform over two uniforms.
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    sigma * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

struct GraphBuilder {
    curves: Vec<BezierCurve>,
    edges: Vec<(usize, usize)>,
}

impl GraphBuilder {
    /// A gently curved segment from `from` towards `direction`, length
    /// `len`, everything kept inside the unit square.
    fn grow(&mut self, rng: &mut ChaCha8Rng, from: Point2, mut heading: f64, len: f64) -> (usize, Point2, f64) {
        heading += rng.random_range(-0.25..0.25);
        let dir = Point2::new(heading.sin(), heading.cos());
        let end = clamp_margin(from + dir * len);
        let mid = from.lerp(end, 0.5);
        let normal = Point2::new(dir.y, -dir.x);
        let bend = rng.random_range(-0.2..0.2) * len;
        let ctrl = clamp_margin(mid + normal * bend);
        let idx = self.curves.len();
        self.curves
            .push(BezierCurve::new(vec![from, ctrl, end]).unwrap());
        let out_heading = (end.x - ctrl.x).atan2(end.y - ctrl.y);
        (idx, end, out_heading)
    }
}

fn clamp_margin(p: Point2) -> Point2 {
    Point2::new(p.x.clamp(0.02, 0.98), p.y.clamp(0.02, 0.98))
}

fn generate_gt(rng: &mut ChaCha8Rng, config: &SynthConfig) -> (LaneGraph, Vec<OrientedBox>) {
    let mut gb = GraphBuilder {
        curves: Vec::new(),
        edges: Vec::new(),
    };
    let lanes = rng.random_range(config.min_lanes..=config.max_lanes);

    // Parallel lanes grow upward from the near edge; chains extend them
    // and may fork.
    let mut chains = 0usize;
    while gb.curves.len() < lanes {
        let x0 = rng.random_range(0.08..0.92);
        let y0 = rng.random_range(0.03..0.15);
        let mut at = Point2::new(x0, y0);
        let mut heading = rng.random_range(-0.3..0.3);
        let mut prev: Option<usize> = None;
        let links = rng.random_range(1..=3usize);
        for _ in 0..links {
            if gb.curves.len() >= lanes {
                break;
            }
            let len = rng.random_range(0.18..0.30);
            let (idx, end, out_heading) = gb.grow(rng, at, heading, len);
            if let Some(p) = prev {
                gb.edges.push((p, idx));
            }
            prev = Some(idx);
            at = end;
            heading = out_heading;
        }
        // Fork the chain end into two children.
        if let Some(p) = prev {
            if rng.random_bool(config.junction_rate.clamp(0.0, 1.0)) && gb.curves.len() + 2 <= lanes + 1 {
                for side in [-0.5, 0.5] {
                    let len = rng.random_range(0.15..0.25);
                    let (idx, _, _) = gb.grow(rng, at, heading + side, len);
                    gb.edges.push((p, idx));
                }
            }
        }
        chains += 1;
        if chains > 4 * lanes {
            break;
        }
    }

    let n = gb.curves.len();
    let incidence = IncidenceMatrix::from_pairs(n, &gb.edges).expect("edges in range");
    let graph = LaneGraph::new(gb.curves, incidence).expect("square by construction");

    let n_objects = rng.random_range(config.min_objects..=config.max_objects);
    let mut boxes = Vec::with_capacity(n_objects);
    for _ in 0..n_objects {
        let long: f64 = rng.random_range(0.04..0.12);
        let short: f64 = rng.random_range(0.02..long.min(0.05));
        let geometry = BoxGeometry::new(
            Point2::new(rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)),
            long.max(short + 1e-4),
            short,
            rng.random_range(0.0..std::f64::consts::PI),
        )
        .expect("sides ordered");
        let class = rng.random_range(0..config.n_classes);
        boxes.push(OrientedBox::one_hot(geometry, class, config.n_classes).unwrap());
    }
    (graph, boxes)
}

fn corrupt(
    rng: &mut ChaCha8Rng,
    gt_graph: &LaneGraph,
    gt_boxes: &[OrientedBox],
    config: &SynthConfig,
) -> (LaneGraph, Vec<OrientedBox>) {
    // Drop lines.
    let survivors: Vec<usize> = (0..gt_graph.len())
        .filter(|_| !rng.random_bool(config.drop_rate.clamp(0.0, 1.0)))
        .collect();
    let old_to_new: std::collections::HashMap<usize, usize> = survivors
        .iter()
        .enumerate()
        .map(|(new, &old)| (old, new))
        .collect();

    // Perturb survivors.
    let mut curves: Vec<BezierCurve> = survivors
        .iter()
        .map(|&i| {
            let pts = gt_graph.centerlines()[i]
                .control_points()
                .iter()
                .map(|p| {
                    Point2::new(
                        p.x + gaussian(rng, config.noise_sigma),
                        p.y + gaussian(rng, config.noise_sigma),
                    )
                    .clamp_unit()
                })
                .collect();
            BezierCurve::new(pts).unwrap()
        })
        .collect();

    // Spurious lines.
    let mut spurious = 0usize;
    for _ in 0..gt_graph.len() {
        if rng.random_bool(config.false_positive_rate.clamp(0.0, 1.0)) {
            let from = Point2::new(rng.random_range(0.05..0.95), rng.random_range(0.05..0.8));
            let dir = rng.random_range(-0.6..0.6);
            let len = rng.random_range(0.1..0.3);
            let end = clamp_margin(from + Point2::new(dir.sin(), dir.cos()) * len);
            curves.push(BezierCurve::new(vec![from, from.lerp(end, 0.5), end]).unwrap());
            spurious += 1;
        }
    }

    let n = curves.len();
    let mut incidence = IncidenceMatrix::zeros(n);
    for (i, j) in gt_graph.incidence().pairs() {
        if let (Some(&a), Some(&b)) = (old_to_new.get(&i), old_to_new.get(&j)) {
            incidence.set(a, b, true);
        }
    }
    if config.incidence_flip_rate > 0.0 {
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random_bool(config.incidence_flip_rate.clamp(0.0, 1.0)) {
                    let v = incidence.get(i, j);
                    incidence.set(i, j, !v);
                }
            }
        }
    }

    let n_real = n - spurious;
    let probs: Vec<f64> = (0..n)
        .map(|i| {
            if i < n_real {
                rng.random_range(0.7..1.0)
            } else {
                rng.random_range(0.55..0.9)
            }
        })
        .collect();
    let graph = LaneGraph::new(curves, incidence)
        .expect("square by construction")
        .with_detection_probs(probs)
        .expect("lengths match");

    // Boxes inherit the same treatment: jitter, keep all.
    let boxes = gt_boxes
        .iter()
        .map(|b| {
            let g = b.geometry();
            let center = Point2::new(
                (g.center.x + gaussian(rng, config.noise_sigma)).clamp(0.0, 1.0),
                (g.center.y + gaussian(rng, config.noise_sigma)).clamp(0.0, 1.0),
            );
            let geometry = BoxGeometry::new(center, g.long_side, g.short_side, g.heading)
                .expect("sides unchanged");
            OrientedBox::new(geometry, b.class_probs().to_vec()).expect("probs unchanged")
        })
        .collect();

    (graph, boxes)
}

/// Generate one ground-truth scene and a corrupted prediction of it.
/// Deterministic in `seed`.
pub fn synth_scene(seed: u64, config: &SynthConfig) -> (SceneRecord, SceneRecord) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let camera = CameraModel::default_paper();
    let roi = RoiSpec::default();
    let (gt_graph, gt_boxes) = generate_gt(&mut rng, config);
    let (pred_graph, pred_boxes) = corrupt(&mut rng, &gt_graph, &gt_boxes, config);

    let id = format!("synth-{seed:08}");
    let traffic_side = if seed % 2 == 0 {
        TrafficSide::Right
    } else {
        TrafficSide::Left
    };
    let gt = SceneRecord {
        id: id.clone(),
        camera,
        roi,
        graph: gt_graph,
        objects: gt_boxes,
        traffic_side,
    };
    let pred = SceneRecord {
        id,
        camera,
        roi,
        graph: pred_graph,
        objects: pred_boxes,
        traffic_side,
    };
    (gt, pred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::validate;

    #[test]
    fn deterministic_in_seed() {
        let cfg = SynthConfig::default();
        let (gt1, pred1) = synth_scene(7, &cfg);
        let (gt2, pred2) = synth_scene(7, &cfg);
        assert_eq!(gt1, gt2);
        assert_eq!(pred1, pred2);
        let (gt3, _) = synth_scene(8, &cfg);
        assert_ne!(gt1, gt3);
    }

    #[test]
    fn noiseless_prediction_matches_gt_structure() {
        let cfg = SynthConfig::default().noiseless();
        let (gt, pred) = synth_scene(3, &cfg);
        assert_eq!(gt.graph.centerlines(), pred.graph.centerlines());
        assert_eq!(gt.graph.incidence(), pred.graph.incidence());
        assert_eq!(gt.objects, pred.objects);
    }

    #[test]
    fn gt_graphs_are_valid() {
        let cfg = SynthConfig::default();
        for seed in 0..50 {
            let (gt, _) = synth_scene(seed, &cfg);
            let diags = validate(&gt.graph);
            assert!(diags.is_empty(), "seed {seed}: {diags:?}");
            assert!(!gt.graph.is_empty());
            for c in gt.graph.centerlines() {
                for p in c.control_points() {
                    assert!(p.in_unit_square());
                }
            }
        }
    }

    #[test]
    fn junction_rate_produces_edges() {
        let mut cfg = SynthConfig::default();
        cfg.junction_rate = 1.0;
        cfg.min_lanes = 8;
        cfg.max_lanes = 12;
        let mut any_fork = false;
        for seed in 0..20 {
            let (gt, _) = synth_scene(seed, &cfg);
            let pairs = gt.graph.incidence().pairs();
            // A fork shows as one source with two outgoing edges.
            let mut outdeg = std::collections::HashMap::new();
            for (i, _) in pairs {
                *outdeg.entry(i).or_insert(0usize) += 1;
            }
            if outdeg.values().any(|&d| d >= 2) {
                any_fork = true;
            }
        }
        assert!(any_fork);
    }

    #[test]
    fn drop_rate_thins_predictions() {
        let mut cfg = SynthConfig::default().noiseless();
        cfg.drop_rate = 0.5;
        cfg.min_lanes = 40;
        cfg.max_lanes = 40;
        cfg.junction_rate = 0.0;
        let mut total_gt = 0usize;
        let mut total_pred = 0usize;
        for seed in 0..50 {
            let (gt, pred) = synth_scene(seed, &cfg);
            total_gt += gt.graph.len();
            total_pred += pred.graph.len();
        }
        let keep = total_pred as f64 / total_gt as f64;
        assert!((0.4..0.6).contains(&keep), "keep ratio {keep}");
    }
}
