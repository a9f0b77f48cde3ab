//! Evaluation metrics for directed lane graphs and BEV objects:
//! threshold-swept precision/recall on matched centerlines, the detection
//! ratio, the connectivity metric over incidence matrices, IOU-thresholded
//! object precision/recall, and semantic-grid mean IOU.
//!
//! Precision counts interpolated estimate points within the distance
//! threshold of their matched ground-truth line; recall counts
//! ground-truth points covered by at least one matched estimate. Both use
//! the 0/0 -> 1 convention so that empty scenes stay neutral, with a
//! vacuous flag kept alongside.

use crate::assign::{hungarian, CostMatrix, MatchMap};
use crate::curve::{sample_curve, BezierCurve};
use crate::geom::Point2;
use crate::graph::IncidenceMatrix;
use crate::objects::{oriented_iou, ClassGrid, OrientedBox};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of interpolated points per centerline.
pub const DEFAULT_SAMPLES: usize = 100;

/// The threshold sweep: 0.01 .. 0.10 in steps of 0.01 (normalized
/// coordinates; 0.01 is 50 cm at the default ROI scale).
pub fn lane_thresholds() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 100.0).collect()
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("match map covers {map} estimates but the incidence matrix has {actual}")]
    EstimateShapeMismatch { map: usize, actual: usize },
    #[error("match map covers {map} targets but the incidence matrix has {actual}")]
    TargetShapeMismatch { map: usize, actual: usize },
    #[error("class grids have different shapes")]
    GridShapeMismatch,
    #[error("grid label {0} out of range for {1} classes")]
    LabelOutOfRange(usize, usize),
    #[error(transparent)]
    Curve(#[from] crate::curve::CurveError),
}

/// Counts and ratios at one threshold.
///
/// `tp`/`fp` count estimate-side points (or detections); `covered`/`fn`
/// count ground-truth-side points. Precision is `tp / (tp + fp)` and
/// recall is `covered / (covered + fn)`, both 1 when undefined. For
/// detection-style metrics the two sides coincide and `covered == tp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRPoint {
    pub threshold: f64,
    pub tp: u64,
    pub fp: u64,
    pub covered: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
    pub precision: f64,
    pub recall: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

impl PRPoint {
    /// Point-level counts: estimate-side tp/fp, ground-truth-side
    /// covered/missed.
    pub fn from_point_counts(threshold: f64, tp: u64, fp: u64, covered: u64, false_neg: u64) -> Self {
        Self {
            threshold,
            tp,
            fp,
            covered,
            false_neg,
            precision: ratio(tp, tp + fp),
            recall: ratio(covered, covered + false_neg),
        }
    }

    /// Detection counts where a true positive is one object on both sides.
    pub fn from_detection_counts(threshold: f64, tp: u64, fp: u64, false_neg: u64) -> Self {
        Self::from_point_counts(threshold, tp, fp, tp, false_neg)
    }

    /// No points contributed on either side.
    pub fn is_vacuous(&self) -> bool {
        self.tp + self.fp == 0 && self.covered + self.false_neg == 0
    }
}

/// Lane precision/recall sweep plus the scalar lane-graph summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneMetricReport {
    pub pr_curve: Vec<PRPoint>,
    /// Mean precision over the threshold sweep.
    pub m_pre: f64,
    /// Mean recall over the threshold sweep.
    pub m_rec: f64,
    pub detection_ratio: f64,
    pub conn_precision: f64,
    pub conn_recall: f64,
    pub conn_iou: f64,
    /// True when no estimate points existed to score.
    pub vacuous: bool,
}

/// Dense point sets for one matched scene, so threshold sweeps reuse the
/// distance computations.
struct MatchedDistances {
    /// Per estimate point: distance to the matched target's sample set
    /// (only for matched estimates).
    estimate_dists: Vec<f64>,
    /// Per target point of targets with at least one estimate: minimum
    /// distance to the points of the estimates matched to that target.
    target_dists: Vec<f64>,
}

fn min_dist_to_set(p: Point2, set: &[Point2]) -> f64 {
    set.iter()
        .map(|q| p.dist(*q))
        .fold(f64::INFINITY, f64::min)
}

fn matched_distances(
    estimates: &[BezierCurve],
    targets: &[BezierCurve],
    match_map: &MatchMap,
    samples: usize,
) -> Result<MatchedDistances, MetricError> {
    let est_samples: Vec<Vec<Point2>> = estimates
        .iter()
        .map(|c| sample_curve(c, samples).map(|p| p.points))
        .collect::<Result<_, _>>()?;
    let tgt_samples: Vec<Vec<Point2>> = targets
        .iter()
        .map(|c| sample_curve(c, samples).map(|p| p.points))
        .collect::<Result<_, _>>()?;

    let mut estimate_dists = Vec::new();
    for (i, pts) in est_samples.iter().enumerate() {
        let Some(n) = match_map.target_of(i) else {
            continue;
        };
        for &p in pts {
            estimate_dists.push(min_dist_to_set(p, &tgt_samples[n]));
        }
    }

    let mut target_dists = Vec::new();
    for (n, pts) in tgt_samples.iter().enumerate() {
        let matched = match_map.estimates_of(n);
        if matched.is_empty() {
            continue; // missed centerlines are not penalized here
        }
        for &p in pts {
            let d = matched
                .iter()
                .map(|&i| min_dist_to_set(p, &est_samples[i]))
                .fold(f64::INFINITY, f64::min);
            target_dists.push(d);
        }
    }

    Ok(MatchedDistances {
        estimate_dists,
        target_dists,
    })
}

fn pr_from_distances(d: &MatchedDistances, threshold: f64) -> PRPoint {
    let tp = d.estimate_dists.iter().filter(|x| **x <= threshold).count() as u64;
    let fp = d.estimate_dists.len() as u64 - tp;
    let covered = d.target_dists.iter().filter(|x| **x <= threshold).count() as u64;
    let false_neg = d.target_dists.len() as u64 - covered;
    PRPoint::from_point_counts(threshold, tp, fp, covered, false_neg)
}

/// Precision/recall of matched centerlines at one distance threshold.
pub fn lane_pr(
    estimates: &[BezierCurve],
    targets: &[BezierCurve],
    match_map: &MatchMap,
    threshold: f64,
    samples: usize,
) -> Result<PRPoint, MetricError> {
    let d = matched_distances(estimates, targets, match_map, samples)?;
    Ok(pr_from_distances(&d, threshold))
}

/// The full threshold sweep with its means.
pub fn lane_pr_curve(
    estimates: &[BezierCurve],
    targets: &[BezierCurve],
    match_map: &MatchMap,
    samples: usize,
) -> Result<(Vec<PRPoint>, f64, f64), MetricError> {
    let d = matched_distances(estimates, targets, match_map, samples)?;
    let curve: Vec<PRPoint> = lane_thresholds()
        .into_iter()
        .map(|t| pr_from_distances(&d, t))
        .collect();
    let m_pre = curve.iter().map(|p| p.precision).sum::<f64>() / curve.len() as f64;
    let m_rec = curve.iter().map(|p| p.recall).sum::<f64>() / curve.len() as f64;
    Ok((curve, m_pre, m_rec))
}

/// Fraction of targets matched by at least one estimate; 1 for an empty
/// target set.
pub fn detection_ratio(match_map: &MatchMap, n_targets: usize) -> f64 {
    if n_targets == 0 {
        return 1.0;
    }
    match_map.covered_targets() as f64 / n_targets as f64
}

/// Connectivity counts over incidence matrices under a match map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityScores {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
    /// Total positive ground-truth entries.
    pub gt_edges: u64,
    pub precision: f64,
    pub recall: f64,
    pub iou: f64,
}

impl ConnectivityScores {
    pub fn from_counts(tp: u64, fp: u64, false_neg: u64, gt_edges: u64) -> Self {
        let iou_den = tp + fp + false_neg;
        Self {
            tp,
            fp,
            false_neg,
            gt_edges,
            precision: ratio(tp, tp + fp),
            recall: ratio(gt_edges - false_neg, gt_edges),
            iou: ratio(tp, iou_den),
        }
    }
}

/// The connectivity metric: an estimated edge `(i, j)` is a true positive
/// when both ends match the same target or the matched targets are
/// themselves connected; a ground-truth edge is a false negative when no
/// estimated edge links estimates matched to its two ends.
pub fn connectivity(
    estimated: &IncidenceMatrix,
    target: &IncidenceMatrix,
    match_map: &MatchMap,
) -> Result<ConnectivityScores, MetricError> {
    if estimated.side() != match_map.n_estimates() {
        return Err(MetricError::EstimateShapeMismatch {
            map: match_map.n_estimates(),
            actual: estimated.side(),
        });
    }
    if target.side() != match_map.n_targets() {
        return Err(MetricError::TargetShapeMismatch {
            map: match_map.n_targets(),
            actual: target.side(),
        });
    }

    let mut tp = 0u64;
    let mut fp = 0u64;
    for (i, j) in estimated.pairs() {
        match (match_map.target_of(i), match_map.target_of(j)) {
            (Some(m), Some(n)) if m == n || target.get(m, n) => tp += 1,
            _ => fp += 1,
        }
    }

    let mut false_neg = 0u64;
    let gt_edges = target.edge_count() as u64;
    for (m, n) in target.pairs() {
        let found = match_map.estimates_of(m).iter().any(|&i| {
            match_map
                .estimates_of(n)
                .iter()
                .any(|&j| estimated.get(i, j))
        });
        if !found {
            false_neg += 1;
        }
    }

    Ok(ConnectivityScores::from_counts(tp, fp, false_neg, gt_edges))
}

/// IOU-thresholded object precision/recall.
///
/// Matching runs once per class with the Hungarian algorithm on
/// `1 - IOU`; sweeping the thresholds then reclassifies the fixed pairs.
/// Estimates whose argmax class is the no-detection channel are ignored.
pub fn object_pr(
    estimates: &[OrientedBox],
    targets: &[OrientedBox],
    iou_thresholds: &[f64],
) -> Vec<PRPoint> {
    let stats = object_match_stats(estimates, targets);
    iou_thresholds
        .iter()
        .map(|&t| stats.at_threshold(t))
        .collect()
}

/// Class-restricted Hungarian matching outcome, reusable across
/// thresholds and scenes.
#[derive(Debug, Clone, Default)]
pub struct ObjectMatchStats {
    /// IOU of each matched estimate/target pair.
    pub pair_ious: Vec<f64>,
    pub n_estimates: u64,
    pub n_targets: u64,
}

impl ObjectMatchStats {
    pub fn at_threshold(&self, threshold: f64) -> PRPoint {
        let tp = self.pair_ious.iter().filter(|d| **d >= threshold).count() as u64;
        PRPoint::from_detection_counts(
            threshold,
            tp,
            self.n_estimates - tp,
            self.n_targets - tp,
        )
    }

    pub fn merge(&mut self, other: &ObjectMatchStats) {
        self.pair_ious.extend_from_slice(&other.pair_ious);
        self.n_estimates += other.n_estimates;
        self.n_targets += other.n_targets;
    }
}

pub fn object_match_stats(estimates: &[OrientedBox], targets: &[OrientedBox]) -> ObjectMatchStats {
    let active: Vec<&OrientedBox> = estimates
        .iter()
        .filter(|b| !b.is_no_detection())
        .collect();
    let classes: std::collections::BTreeSet<usize> = active
        .iter()
        .map(|b| b.class_id())
        .chain(targets.iter().map(|b| b.class_id()))
        .collect();

    let mut stats = ObjectMatchStats {
        pair_ious: Vec::new(),
        n_estimates: active.len() as u64,
        n_targets: targets.len() as u64,
    };
    for class in classes {
        let est: Vec<&OrientedBox> = active
            .iter()
            .copied()
            .filter(|b| b.class_id() == class)
            .collect();
        let tgt: Vec<&OrientedBox> = targets
            .iter()
            .filter(|b| b.class_id() == class)
            .collect();
        if est.is_empty() || tgt.is_empty() {
            continue;
        }
        let costs = CostMatrix::build(est.len(), tgt.len(), |i, j| {
            1.0 - oriented_iou(est[i].geometry(), tgt[j].geometry())
        })
        .expect("iou is finite");
        for (i, j) in hungarian(&costs) {
            stats
                .pair_ious
                .push(oriented_iou(est[i].geometry(), tgt[j].geometry()));
        }
    }
    stats
}

/// Per-class intersection-over-union of two label grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiouReport {
    /// IOU per class; `None` when the class is absent from both grids.
    pub per_class: Vec<Option<f64>>,
    /// Mean over classes present in either grid.
    pub mean: f64,
}

/// Cell-wise per-class IOU; classes absent from both grids are excluded
/// from the mean.
pub fn miou(pred: &ClassGrid, gt: &ClassGrid, n_classes: usize) -> Result<MiouReport, MetricError> {
    if pred.height != gt.height || pred.width != gt.width {
        return Err(MetricError::GridShapeMismatch);
    }
    let mut inter = vec![0u64; n_classes];
    let mut union = vec![0u64; n_classes];
    for (p, g) in pred.labels.iter().zip(&gt.labels) {
        if *p >= n_classes {
            return Err(MetricError::LabelOutOfRange(*p, n_classes));
        }
        if *g >= n_classes {
            return Err(MetricError::LabelOutOfRange(*g, n_classes));
        }
        if p == g {
            inter[*p] += 1;
            union[*p] += 1;
        } else {
            union[*p] += 1;
            union[*g] += 1;
        }
    }
    let per_class: Vec<Option<f64>> = (0..n_classes)
        .map(|c| {
            if union[c] == 0 {
                None
            } else {
                Some(inter[c] as f64 / union[c] as f64)
            }
        })
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let mean = if present.is_empty() {
        1.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    Ok(MiouReport { per_class, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assign::match_min_l1;
    use crate::objects::{BoxGeometry, OrientedBox};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn line(y: f64, x0: f64, x1: f64) -> BezierCurve {
        BezierCurve::new(vec![
            Point2::new(x0, y),
            Point2::new((x0 + x1) / 2.0, y),
            Point2::new(x1, y),
        ])
        .unwrap()
    }

    #[test]
    fn identical_prediction_is_perfect() {
        let targets = vec![line(0.3, 0.1, 0.9), line(0.6, 0.1, 0.9)];
        let m = match_min_l1(&targets, &targets).unwrap();
        for t in lane_thresholds() {
            let p = lane_pr(&targets, &targets, &m, t, 50).unwrap();
            assert_eq!((p.precision, p.recall), (1.0, 1.0));
        }
        let (_, m_pre, m_rec) = lane_pr_curve(&targets, &targets, &m, 50).unwrap();
        assert_eq!((m_pre, m_rec), (1.0, 1.0));
    }

    #[test]
    fn constant_offset_thresholds() {
        let target = vec![line(0.40, 0.1, 0.9)];
        let est = vec![line(0.45, 0.1, 0.9)]; // 0.05 above
        let m = match_min_l1(&est, &target).unwrap();
        let low = lane_pr(&est, &target, &m, 0.01, 100).unwrap();
        assert_eq!((low.precision, low.recall), (0.0, 0.0));
        let high = lane_pr(&est, &target, &m, 0.1, 100).unwrap();
        assert_eq!((high.precision, high.recall), (1.0, 1.0));
    }

    #[test]
    fn staircase_offset_halves_means() {
        let target = vec![line(0.40, 0.1, 0.9)];
        let est = vec![line(0.455, 0.1, 0.9)]; // 0.055: passes 0.06..0.10 only
        let m = match_min_l1(&est, &target).unwrap();
        let (curve, m_pre, m_rec) = lane_pr_curve(&est, &target, &m, 100).unwrap();
        assert_eq!(curve.len(), 10);
        assert_eq!(m_pre, 0.5);
        assert_eq!(m_rec, 0.5);
    }

    #[test]
    fn half_coverage_halves_recall_only() {
        // The estimate traces only the first half of its matched line; at
        // a threshold below the sample spacing the uncovered half shows
        // up purely as false negatives.
        let target = vec![line(0.5, 0.1, 0.9)];
        let est = vec![line(0.5, 0.1, 0.5)];
        let m = match_min_l1(&est, &target).unwrap();
        let p = lane_pr(&est, &target, &m, 0.004, 100).unwrap();
        assert_eq!(p.precision, 1.0);
        assert!((p.recall - 0.5).abs() <= 1.0 / 100.0, "recall {}", p.recall);
    }

    #[test]
    fn missed_centerlines_are_not_penalized() {
        // Two targets, one estimate on target 0; target 1 has no match
        // and contributes nothing.
        let targets = vec![line(0.3, 0.1, 0.9), line(0.7, 0.1, 0.9)];
        let est = vec![line(0.3, 0.1, 0.9)];
        let m = match_min_l1(&est, &targets).unwrap();
        let p = lane_pr(&est, &targets, &m, 0.01, 50).unwrap();
        assert_eq!((p.precision, p.recall), (1.0, 1.0));
        // Detection ratio does see the miss.
        assert_eq!(detection_ratio(&m, 2), 0.5);
    }

    #[test]
    fn empty_prediction_is_vacuous() {
        let targets = vec![line(0.3, 0.1, 0.9)];
        let m = match_min_l1(&[], &targets).unwrap();
        let (curve, m_pre, m_rec) = lane_pr_curve(&[], &targets, &m, 50).unwrap();
        assert!(curve.iter().all(|p| p.is_vacuous()));
        assert_eq!((m_pre, m_rec), (1.0, 1.0));
    }

    #[test]
    fn detection_ratio_examples() {
        let targets = vec![
            line(0.2, 0.1, 0.9),
            line(0.4, 0.1, 0.9),
            line(0.6, 0.1, 0.9),
            line(0.8, 0.1, 0.9),
        ];
        let m = match_min_l1(&targets, &targets).unwrap();
        assert_eq!(detection_ratio(&m, 4), 1.0);

        // Two estimates covering two of four targets.
        let est = vec![line(0.2, 0.1, 0.9), line(0.4, 0.1, 0.9)];
        let m = match_min_l1(&est, &targets).unwrap();
        assert_eq!(detection_ratio(&m, 4), 0.5);

        // All estimates collapse onto one of three targets.
        let targets3 = vec![line(0.2, 0.1, 0.9), line(0.5, 0.1, 0.9), line(0.8, 0.1, 0.9)];
        let est = vec![
            line(0.19, 0.1, 0.9),
            line(0.21, 0.1, 0.9),
            line(0.22, 0.1, 0.9),
        ];
        let m = match_min_l1(&est, &targets3).unwrap();
        assert_relative_eq!(detection_ratio(&m, 3), 1.0 / 3.0, epsilon = 1e-12);

        assert_eq!(detection_ratio(&MatchMap::unmatched(0, 0), 0), 1.0);
    }

    #[test]
    fn connectivity_identity_and_edgeless() {
        let inc = IncidenceMatrix::from_pairs(3, &[(0, 1), (1, 2)]).unwrap();
        let m = MatchMap::identity(3);
        let c = connectivity(&inc, &inc, &m).unwrap();
        assert_eq!((c.precision, c.recall, c.iou), (1.0, 1.0, 1.0));

        let empty = IncidenceMatrix::zeros(3);
        let c = connectivity(&empty, &inc, &m).unwrap();
        assert_eq!((c.precision, c.recall, c.iou), (1.0, 0.0, 0.0));
    }

    #[test]
    fn connectivity_same_target_edge_and_missed_gt_edge() {
        // GT chain A -> B; two estimates both matched to A with one edge
        // between them: the edge is TP, the GT edge is missed.
        let gt = IncidenceMatrix::from_pairs(2, &[(0, 1)]).unwrap();
        let est = IncidenceMatrix::from_pairs(2, &[(0, 1)]).unwrap();
        let m = MatchMap::from_assignments(vec![Some(0), Some(0)], 2);
        let c = connectivity(&est, &gt, &m).unwrap();
        assert_eq!((c.tp, c.fp, c.false_neg), (1, 0, 1));
        assert_eq!((c.precision, c.recall), (1.0, 0.0));
        assert_relative_eq!(c.iou, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn connectivity_fragmented_chain_is_perfect() {
        // A fragmented into a1, a2 (edge a1->a2), plus b matched to B with
        // edge a2->b; GT is A -> B.
        let gt = IncidenceMatrix::from_pairs(2, &[(0, 1)]).unwrap();
        let est = IncidenceMatrix::from_pairs(3, &[(0, 1), (1, 2)]).unwrap();
        let m = MatchMap::from_assignments(vec![Some(0), Some(0), Some(1)], 2);
        let c = connectivity(&est, &gt, &m).unwrap();
        assert_eq!((c.tp, c.fp, c.false_neg), (2, 0, 0));
        assert_eq!(c.iou, 1.0);
    }

    #[test]
    fn connectivity_unmatched_endpoint_is_fp() {
        let gt = IncidenceMatrix::from_pairs(2, &[(0, 1)]).unwrap();
        let est = IncidenceMatrix::from_pairs(2, &[(0, 1)]).unwrap();
        let m = MatchMap::from_assignments(vec![Some(0), None], 2);
        let c = connectivity(&est, &gt, &m).unwrap();
        assert_eq!((c.tp, c.fp), (0, 1));
    }

    #[test]
    fn connectivity_shape_errors() {
        let gt = IncidenceMatrix::zeros(2);
        let est = IncidenceMatrix::zeros(3);
        let m = MatchMap::identity(2);
        assert!(matches!(
            connectivity(&est, &gt, &m),
            Err(MetricError::EstimateShapeMismatch { .. })
        ));
    }

    fn obox(cx: f64, cy: f64, class: usize) -> OrientedBox {
        OrientedBox::one_hot(
            BoxGeometry::new(Point2::new(cx, cy), 0.2, 0.1, 0.0).unwrap(),
            class,
            3,
        )
        .unwrap()
    }

    #[test]
    fn object_pr_cases() {
        let targets = vec![obox(0.3, 0.3, 0), obox(0.7, 0.7, 1)];
        let pr = object_pr(&targets, &targets, &[0.5]);
        assert_eq!((pr[0].precision, pr[0].recall), (1.0, 1.0));

        let pr = object_pr(&[], &targets, &[0.5]);
        assert_eq!((pr[0].precision, pr[0].recall), (1.0, 0.0));

        // One pair straddling the threshold sweep: two unit-ratio boxes
        // offset for IOU 1/3 < 0.5 < 1.
        let a = OrientedBox::one_hot(
            BoxGeometry::new(Point2::new(0.5, 0.5), 0.2, 0.2, 0.0).unwrap(),
            0,
            2,
        )
        .unwrap();
        let b = OrientedBox::one_hot(
            BoxGeometry::new(Point2::new(0.6, 0.5), 0.2, 0.2, 0.0).unwrap(),
            0,
            2,
        )
        .unwrap();
        let pr = object_pr(&[a], &[b], &[0.25, 0.75]);
        assert_eq!((pr[0].precision, pr[0].recall), (1.0, 1.0));
        assert_eq!((pr[1].precision, pr[1].recall), (0.0, 0.0));
    }

    #[test]
    fn object_matching_is_class_restricted() {
        // Perfect geometry but wrong class: no pair forms, so both sides
        // count as errors.
        let gt = vec![obox(0.5, 0.5, 0)];
        let est = vec![obox(0.5, 0.5, 1)];
        let pr = object_pr(&est, &gt, &[0.1]);
        assert_eq!((pr[0].tp, pr[0].fp, pr[0].false_neg), (0, 1, 1));

        // No-detection estimates are ignored entirely.
        let silent = OrientedBox::new(
            BoxGeometry::new(Point2::new(0.5, 0.5), 0.2, 0.1, 0.0).unwrap(),
            vec![0.1, 0.1, 0.8],
        )
        .unwrap();
        let pr = object_pr(&[silent], &gt, &[0.1]);
        assert_eq!((pr[0].tp, pr[0].fp, pr[0].false_neg), (0, 0, 1));
    }

    #[test]
    fn miou_cases() {
        let a = ClassGrid::from_labels(2, 2, vec![0, 1, 1, 2]);
        let r = miou(&a, &a, 3).unwrap();
        assert_eq!(r.per_class, vec![Some(1.0), Some(1.0), Some(1.0)]);
        assert_eq!(r.mean, 1.0);

        // Prediction all background, ground truth half class 1.
        let pred = ClassGrid::from_labels(2, 2, vec![0, 0, 0, 0]);
        let gt = ClassGrid::from_labels(2, 2, vec![0, 0, 1, 1]);
        let r = miou(&pred, &gt, 3).unwrap();
        assert_eq!(r.per_class[1], Some(0.0));
        assert_eq!(r.per_class[2], None); // absent from both -> excluded

        // 10x10 grids with 5x10 class-1 blocks overlapping in 25 cells.
        let mut p = vec![0usize; 100];
        let mut g = vec![0usize; 100];
        for row in 0..5 {
            for col in 0..10 {
                p[row * 10 + col] = 1;
            }
        }
        for row in 0..10 {
            for col in 0..5 {
                g[row * 10 + col] = 1;
            }
        }
        let r = miou(
            &ClassGrid::from_labels(10, 10, p),
            &ClassGrid::from_labels(10, 10, g),
            2,
        )
        .unwrap();
        assert_relative_eq!(r.per_class[1].unwrap(), 1.0 / 3.0, epsilon = 1e-12);

        let bad = ClassGrid::from_labels(1, 1, vec![0]);
        let wide = ClassGrid::from_labels(1, 2, vec![0, 0]);
        assert!(matches!(
            miou(&bad, &wide, 2),
            Err(MetricError::GridShapeMismatch)
        ));
    }

    proptest! {
        #[test]
        fn lane_pr_monotone_in_threshold(
            offsets in proptest::collection::vec(0.0f64..0.12, 1..5),
        ) {
            let targets: Vec<BezierCurve> = (0..offsets.len())
                .map(|i| line(0.1 + 0.15 * i as f64, 0.1, 0.9))
                .collect();
            let est: Vec<BezierCurve> = targets
                .iter()
                .zip(&offsets)
                .map(|(t, d)| {
                    let pts = t.control_points().iter().map(|p| Point2::new(p.x, p.y + d)).collect();
                    BezierCurve::new(pts).unwrap()
                })
                .collect();
            let m = match_min_l1(&est, &targets).unwrap();
            let (curve, _, _) = lane_pr_curve(&est, &targets, &m, 40).unwrap();
            for w in curve.windows(2) {
                prop_assert!(w[1].precision + 1e-12 >= w[0].precision);
                prop_assert!(w[1].recall + 1e-12 >= w[0].recall);
            }
        }

        #[test]
        fn object_precision_non_increasing_in_threshold(
            dx in 0.0f64..0.2,
        ) {
            let gt = vec![obox(0.4, 0.4, 0)];
            let est = vec![obox(0.4 + dx, 0.4, 0)];
            let pr = object_pr(&est, &gt, &[0.1, 0.3, 0.5, 0.7, 0.9]);
            for w in pr.windows(2) {
                prop_assert!(w[0].precision + 1e-12 >= w[1].precision);
            }
        }

        #[test]
        fn miou_symmetric(
            labels_a in proptest::collection::vec(0usize..3, 16),
            labels_b in proptest::collection::vec(0usize..3, 16),
        ) {
            let a = ClassGrid::from_labels(4, 4, labels_a);
            let b = ClassGrid::from_labels(4, 4, labels_b);
            let ab = miou(&a, &b, 3).unwrap();
            let ba = miou(&b, &a, 3).unwrap();
            prop_assert_eq!(ab.per_class, ba.per_class);
            prop_assert!((ab.mean - ba.mean).abs() < 1e-12);
        }
    }
}
