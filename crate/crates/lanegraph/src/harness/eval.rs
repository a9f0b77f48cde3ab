//! Dataset-level evaluation: pair ground-truth and predicted scenes by
//! id, score every scene, and reduce to an aggregate report.
//!
//! Scenes are independent, so they are scored in parallel; the reduction
//! sums TP/FP/FN counts per threshold before taking ratios (per-scene
//! averaging is available as a config alternative). Set the
//! `LANEGRAPH_WORKERS` environment variable to bound the worker pool.

use crate::assign::{match_min_l1, MatchMap};
use crate::curve::BezierCurve;
use crate::graph::{IncidenceMatrix, LaneGraph};
use crate::harness::scene::{SceneRecord, FORMAT_VERSION};
use crate::metrics::{
    connectivity, detection_ratio, lane_pr_curve, lane_thresholds, miou, object_match_stats,
    ConnectivityScores, LaneMetricReport, MetricError, MiouReport, ObjectMatchStats, PRPoint,
};
use crate::objects::{grid_argmax, rasterize_instances};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction set is missing scene ids: {0:?}")]
    MissingPredictions(Vec<String>),
    #[error("prediction set has unknown scene ids: {0:?}")]
    UnknownPredictions(Vec<String>),
    #[error("scene {id}: {source}")]
    Scene {
        id: String,
        #[source]
        source: MetricError,
    },
}

/// How per-scene results combine into the aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Sum TP/FP/FN across scenes, then take ratios.
    #[default]
    CountSum,
    /// Average each scene's ratios.
    SceneMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Interpolated points per centerline.
    pub samples: usize,
    /// Predicted centerlines below this detection probability are
    /// dropped before matching.
    pub detection_threshold: f64,
    /// Predicted edges below this association probability are dropped.
    pub association_threshold: f64,
    pub object_iou_thresholds: Vec<f64>,
    /// Also rasterize boxes and score semantic mean IOU.
    pub with_miou: bool,
    pub aggregation: Aggregation,
    /// Emit per-scene blocks in the report.
    pub per_scene: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            samples: crate::metrics::DEFAULT_SAMPLES,
            detection_threshold: 0.5,
            association_threshold: 0.5,
            object_iou_thresholds: (1..=9).map(|k| k as f64 / 10.0).collect(),
            with_miou: true,
            aggregation: Aggregation::CountSum,
            per_scene: false,
        }
    }
}

/// Scores for one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub id: String,
    pub lane: LaneMetricReport,
    pub objects: Vec<PRPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub miou: Option<MiouReport>,
    /// Matched-target count and target count feeding the aggregate
    /// detection ratio.
    pub matched_targets: u64,
    pub total_targets: u64,
}

/// The evaluation output document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub format_version: u32,
    pub scene_count: usize,
    /// Scenes with no estimate points to score.
    pub vacuous_scenes: usize,
    pub aggregate: LaneMetricReport,
    pub object_pr: Vec<PRPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub miou: Option<MiouReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_scene: Option<Vec<SceneMetrics>>,
}

/// Drop predicted centerlines below the detection threshold and predicted
/// edges below the association threshold.
pub fn activate_prediction(graph: &LaneGraph, det_threshold: f64, assoc_threshold: f64) -> LaneGraph {
    let keep: Vec<usize> = (0..graph.len())
        .filter(|&i| {
            graph
                .detection_probs()
                .map(|p| p[i] >= det_threshold)
                .unwrap_or(true)
        })
        .collect();
    let old_to_new: std::collections::HashMap<usize, usize> = keep
        .iter()
        .enumerate()
        .map(|(new, &old)| (old, new))
        .collect();

    let curves: Vec<BezierCurve> = keep
        .iter()
        .map(|&i| graph.centerlines()[i].clone())
        .collect();
    let mut incidence = IncidenceMatrix::zeros(curves.len());
    let pairs = graph.incidence().pairs();
    for (k, (i, j)) in pairs.iter().enumerate() {
        if let Some(p) = graph.edge_probs() {
            if p[k] < assoc_threshold {
                continue;
            }
        }
        if let (Some(&a), Some(&b)) = (old_to_new.get(i), old_to_new.get(j)) {
            incidence.set(a, b, true);
        }
    }
    LaneGraph::new(curves, incidence).expect("sides match")
}

struct SceneOutcome {
    metrics: SceneMetrics,
    lane_counts: Vec<PRPoint>,
    conn: ConnectivityScores,
    object_stats: ObjectMatchStats,
    vacuous: bool,
}

fn score_scene(
    gt: &SceneRecord,
    pred: &SceneRecord,
    config: &EvalConfig,
) -> Result<SceneOutcome, MetricError> {
    let active = activate_prediction(
        &pred.graph,
        config.detection_threshold,
        config.association_threshold,
    );
    let estimates = active.centerlines();
    let targets = gt.graph.centerlines();

    let match_map: MatchMap = match_min_l1(estimates, targets)?;
    let (pr_curve, m_pre, m_rec) = lane_pr_curve(estimates, targets, &match_map, config.samples)?;
    let det = detection_ratio(&match_map, targets.len());
    let conn = connectivity(active.incidence(), gt.graph.incidence(), &match_map)?;
    let vacuous = pr_curve.iter().all(|p| p.is_vacuous());

    let lane = LaneMetricReport {
        pr_curve: pr_curve.clone(),
        m_pre,
        m_rec,
        detection_ratio: det,
        conn_precision: conn.precision,
        conn_recall: conn.recall,
        conn_iou: conn.iou,
        vacuous,
    };

    let object_stats = object_match_stats(&pred.objects, &gt.objects);
    let objects: Vec<PRPoint> = config
        .object_iou_thresholds
        .iter()
        .map(|&t| object_stats.at_threshold(t))
        .collect();

    let miou_report = if config.with_miou {
        let (h, w) = (gt.roi.grid_height(), gt.roi.grid_width());
        let channels = gt
            .objects
            .iter()
            .chain(&pred.objects)
            .map(|b| b.class_probs().len())
            .max()
            .unwrap_or(1);
        let gt_labels = grid_argmax(&pad_channels(rasterize_instances(&gt.objects, h, w), channels));
        let pred_labels =
            grid_argmax(&pad_channels(rasterize_instances(&pred.objects, h, w), channels));
        Some(miou(&pred_labels, &gt_labels, channels)?)
    } else {
        None
    };

    Ok(SceneOutcome {
        metrics: SceneMetrics {
            id: gt.id.clone(),
            lane,
            objects,
            miou: miou_report,
            matched_targets: match_map.covered_targets() as u64,
            total_targets: targets.len() as u64,
        },
        lane_counts: pr_curve,
        conn,
        object_stats,
        vacuous,
    })
}

/// Rasterized grids always carry the same channel count so label spaces
/// line up between prediction and ground truth.
fn pad_channels(grid: crate::objects::SemanticGrid, channels: usize) -> crate::objects::SemanticGrid {
    if grid.channels() == channels {
        return grid;
    }
    let mut out = crate::objects::SemanticGrid::zeros(grid.height(), grid.width(), channels);
    for r in 0..grid.height() {
        for c in 0..grid.width() {
            for ch in 0..grid.channels() {
                out.set_value(r, c, ch, grid.get(r, c, ch));
            }
        }
    }
    out
}

fn pair_scenes<'a>(
    gt_set: &'a [SceneRecord],
    pred_set: &'a [SceneRecord],
) -> Result<Vec<(&'a SceneRecord, &'a SceneRecord)>, EvalError> {
    let by_id: std::collections::HashMap<&str, &SceneRecord> =
        pred_set.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut missing = Vec::new();
    let mut pairs = Vec::with_capacity(gt_set.len());
    for gt in gt_set {
        match by_id.get(gt.id.as_str()) {
            Some(pred) => pairs.push((gt, *pred)),
            None => missing.push(gt.id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(EvalError::MissingPredictions(missing));
    }
    let known: std::collections::HashSet<&str> = gt_set.iter().map(|s| s.id.as_str()).collect();
    let unknown: Vec<String> = pred_set
        .iter()
        .filter(|s| !known.contains(s.id.as_str()))
        .map(|s| s.id.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(EvalError::UnknownPredictions(unknown));
    }
    Ok(pairs)
}

/// Evaluate a prediction set against an id-aligned ground-truth set.
pub fn evaluate(
    gt_set: &[SceneRecord],
    pred_set: &[SceneRecord],
    config: &EvalConfig,
) -> Result<MetricReport, EvalError> {
    let pairs = pair_scenes(gt_set, pred_set)?;

    let run = || -> Result<Vec<SceneOutcome>, EvalError> {
        pairs
            .par_iter()
            .map(|(gt, pred)| {
                score_scene(gt, pred, config).map_err(|source| EvalError::Scene {
                    id: gt.id.clone(),
                    source,
                })
            })
            .collect()
    };
    let outcomes = match worker_pool() {
        Some(pool) => pool.install(run),
        None => run(),
    }?;

    Ok(reduce(outcomes, config))
}

fn worker_pool() -> Option<rayon::ThreadPool> {
    let n: usize = std::env::var("LANEGRAPH_WORKERS").ok()?.parse().ok()?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build()
        .ok()
}

fn reduce(outcomes: Vec<SceneOutcome>, config: &EvalConfig) -> MetricReport {
    let scene_count = outcomes.len();
    let vacuous_scenes = outcomes.iter().filter(|o| o.vacuous).count();

    let thresholds = lane_thresholds();
    let aggregate_curve: Vec<PRPoint> = match config.aggregation {
        Aggregation::CountSum => thresholds
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let (mut tp, mut fp, mut covered, mut false_neg) = (0u64, 0u64, 0u64, 0u64);
                for o in &outcomes {
                    let p = &o.lane_counts[k];
                    tp += p.tp;
                    fp += p.fp;
                    covered += p.covered;
                    false_neg += p.false_neg;
                }
                PRPoint::from_point_counts(t, tp, fp, covered, false_neg)
            })
            .collect(),
        Aggregation::SceneMean => thresholds
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let n = scene_count.max(1) as f64;
                let precision = outcomes.iter().map(|o| o.lane_counts[k].precision).sum::<f64>() / n;
                let recall = outcomes.iter().map(|o| o.lane_counts[k].recall).sum::<f64>() / n;
                PRPoint {
                    threshold: t,
                    tp: 0,
                    fp: 0,
                    covered: 0,
                    false_neg: 0,
                    precision,
                    recall,
                }
            })
            .collect(),
    };
    let m_pre = aggregate_curve.iter().map(|p| p.precision).sum::<f64>()
        / aggregate_curve.len().max(1) as f64;
    let m_rec = aggregate_curve.iter().map(|p| p.recall).sum::<f64>()
        / aggregate_curve.len().max(1) as f64;

    let (matched, total) = outcomes.iter().fold((0u64, 0u64), |(m, t), o| {
        (m + o.metrics.matched_targets, t + o.metrics.total_targets)
    });
    let det = match config.aggregation {
        Aggregation::CountSum => {
            if total == 0 {
                1.0
            } else {
                matched as f64 / total as f64
            }
        }
        Aggregation::SceneMean => {
            let n = scene_count.max(1) as f64;
            outcomes
                .iter()
                .map(|o| o.metrics.lane.detection_ratio)
                .sum::<f64>()
                / n
        }
    };

    let conn_total = outcomes.iter().fold((0u64, 0u64, 0u64, 0u64), |acc, o| {
        (
            acc.0 + o.conn.tp,
            acc.1 + o.conn.fp,
            acc.2 + o.conn.false_neg,
            acc.3 + o.conn.gt_edges,
        )
    });
    let conn = match config.aggregation {
        Aggregation::CountSum => {
            ConnectivityScores::from_counts(conn_total.0, conn_total.1, conn_total.2, conn_total.3)
        }
        Aggregation::SceneMean => {
            let n = scene_count.max(1) as f64;
            let mut c = ConnectivityScores::from_counts(
                conn_total.0,
                conn_total.1,
                conn_total.2,
                conn_total.3,
            );
            c.precision = outcomes.iter().map(|o| o.conn.precision).sum::<f64>() / n;
            c.recall = outcomes.iter().map(|o| o.conn.recall).sum::<f64>() / n;
            c.iou = outcomes.iter().map(|o| o.conn.iou).sum::<f64>() / n;
            c
        }
    };

    let mut object_stats = ObjectMatchStats::default();
    for o in &outcomes {
        object_stats.merge(&o.object_stats);
    }
    let object_pr: Vec<PRPoint> = config
        .object_iou_thresholds
        .iter()
        .map(|&t| object_stats.at_threshold(t))
        .collect();

    let miou_aggregate = if config.with_miou {
        let reports: Vec<&MiouReport> = outcomes
            .iter()
            .filter_map(|o| o.metrics.miou.as_ref())
            .collect();
        if reports.is_empty() {
            None
        } else {
            let n_classes = reports.iter().map(|r| r.per_class.len()).max().unwrap_or(0);
            // Mean of per-scene per-class IOUs over scenes where the
            // class is present.
            let per_class: Vec<Option<f64>> = (0..n_classes)
                .map(|c| {
                    let vals: Vec<f64> = reports
                        .iter()
                        .filter_map(|r| r.per_class.get(c).copied().flatten())
                        .collect();
                    if vals.is_empty() {
                        None
                    } else {
                        Some(vals.iter().sum::<f64>() / vals.len() as f64)
                    }
                })
                .collect();
            let present: Vec<f64> = per_class.iter().flatten().copied().collect();
            let mean = if present.is_empty() {
                1.0
            } else {
                present.iter().sum::<f64>() / present.len() as f64
            };
            Some(MiouReport { per_class, mean })
        }
    } else {
        None
    };

    let aggregate = LaneMetricReport {
        pr_curve: aggregate_curve,
        m_pre,
        m_rec,
        detection_ratio: det,
        conn_precision: conn.precision,
        conn_recall: conn.recall,
        conn_iou: conn.iou,
        vacuous: vacuous_scenes == scene_count && scene_count > 0,
    };

    MetricReport {
        format_version: FORMAT_VERSION,
        scene_count,
        vacuous_scenes,
        aggregate,
        object_pr,
        miou: miou_aggregate,
        per_scene: if config.per_scene {
            Some(outcomes.into_iter().map(|o| o.metrics).collect())
        } else {
            None
        },
    }
}
