//! Assignment machinery: optimal one-to-one Hungarian matching for
//! training-style supervision, the evaluation-time nearest-target match,
//! and the matching-cost building blocks (cross-entropy, L1, flip-aware
//! angle loss, association-input concatenation).

use crate::curve::{control_point_l1, BezierCurve};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probability clamp for cross-entropy terms.
const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum AssignError {
    #[error("cost matrix contains a non-finite value at ({0}, {1})")]
    NonFiniteCost(usize, usize),
    #[error("cost matrix rows have inconsistent lengths")]
    RaggedMatrix,
    #[error("parameter vectors have different lengths: {0} vs {1}")]
    ParamLengthMismatch(usize, usize),
    #[error("feature vectors have different lengths: {0} vs {1}")]
    FeatureLengthMismatch(usize, usize),
    #[error("class distribution sums to {0}, expected 1 within 1e-6")]
    NotADistribution(f64),
    #[error("class label {0} out of range for {1} classes")]
    LabelOutOfRange(usize, usize),
    #[error("curves have mismatched control point counts")]
    CurveArityMismatch(#[from] crate::curve::CurveError),
}

/// Rectangular matrix of non-negative assignment costs
/// (rows = estimates, columns = targets).
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, AssignError> {
        let nrows = rows.len();
        let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut values = Vec::with_capacity(nrows * ncols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(AssignError::RaggedMatrix);
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(AssignError::NonFiniteCost(i, j));
                }
                values.push(v);
            }
        }
        Ok(Self {
            rows: nrows,
            cols: ncols,
            values,
        })
    }

    pub fn build(
        rows: usize,
        cols: usize,
        mut cost: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, AssignError> {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = cost(i, j);
                if !v.is_finite() {
                    return Err(AssignError::NonFiniteCost(i, j));
                }
                values.push(v);
            }
        }
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }
}

/// Globally optimal one-to-one assignment minimizing total cost.
///
/// Rectangular inputs are padded internally to square with `max + 1`
/// dummy costs; pairs involving a dummy row or column are dropped, so the
/// result always has `min(rows, cols)` pairs. Runs the O(n^3)
/// potential-based shortest-augmenting-path form of the algorithm.
pub fn hungarian(costs: &CostMatrix) -> Vec<(usize, usize)> {
    let (r, c) = (costs.rows(), costs.cols());
    if r == 0 || c == 0 {
        return Vec::new();
    }
    let dim = r.max(c);
    let pad = (0..r)
        .flat_map(|i| (0..c).map(move |j| (i, j)))
        .map(|(i, j)| costs.get(i, j))
        .fold(0.0f64, f64::max)
        + 1.0;
    let cost_at = |i: usize, j: usize| -> f64 {
        if i < r && j < c {
            costs.get(i, j)
        } else {
            pad
        }
    };

    // Potentials over rows (u) and columns (v); `way[j]` remembers the
    // augmenting path. Columns are 1-based internally with 0 as the
    // virtual entry column.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; dim + 1];
    let mut v = vec![0.0; dim + 1];
    let mut matched_row = vec![0usize; dim + 1]; // column -> row (1-based)
    let mut way = vec![0usize; dim + 1];

    for i in 1..=dim {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut min_v = vec![inf; dim + 1];
        let mut used = vec![false; dim + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=dim {
                if used[j] {
                    continue;
                }
                let cur = cost_at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < min_v[j] {
                    min_v[j] = cur;
                    way[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=dim {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs = Vec::new();
    for j in 1..=dim {
        let i = matched_row[j];
        if i >= 1 && i - 1 < r && j - 1 < c {
            pairs.push((i - 1, j - 1));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Total cost of an assignment on a matrix.
pub fn assignment_cost(costs: &CostMatrix, pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(i, j)| costs.get(i, j)).sum()
}

/// Evaluation-time match: estimate `i` is matched to target `M(i)`, and
/// `S(n)` collects the estimates matched to target `n`. Multiple
/// estimates may share a target; every estimate has at most one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchMap {
    matched: Vec<Option<usize>>,
    per_target: Vec<Vec<usize>>,
}

impl MatchMap {
    pub fn unmatched(n_estimates: usize, n_targets: usize) -> Self {
        Self {
            matched: vec![None; n_estimates],
            per_target: vec![Vec::new(); n_targets],
        }
    }

    /// Identity match over `n` items.
    pub fn identity(n: usize) -> Self {
        Self {
            matched: (0..n).map(Some).collect(),
            per_target: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn from_assignments(
        matched: Vec<Option<usize>>,
        n_targets: usize,
    ) -> Self {
        let mut per_target = vec![Vec::new(); n_targets];
        for (i, m) in matched.iter().enumerate() {
            if let Some(n) = m {
                per_target[*n].push(i);
            }
        }
        Self {
            matched,
            per_target,
        }
    }

    /// Target index `M(i)` for estimate `i`.
    pub fn target_of(&self, estimate: usize) -> Option<usize> {
        self.matched[estimate]
    }

    /// Estimates `S(n)` matched to target `n`.
    pub fn estimates_of(&self, target: usize) -> &[usize] {
        &self.per_target[target]
    }

    pub fn n_estimates(&self) -> usize {
        self.matched.len()
    }

    pub fn n_targets(&self) -> usize {
        self.per_target.len()
    }

    /// Number of targets with at least one matched estimate.
    pub fn covered_targets(&self) -> usize {
        self.per_target.iter().filter(|s| !s.is_empty()).count()
    }

    /// True when estimates exist but nothing could be matched because the
    /// target set is empty.
    pub fn is_vacuous(&self) -> bool {
        self.per_target.is_empty() && !self.matched.is_empty()
    }
}

/// Match each estimate to the target with minimum control-point L1
/// distance; ties break to the lowest target index.
///
/// An empty target set leaves every estimate unmatched (the map reports
/// itself vacuous) rather than failing.
pub fn match_min_l1(
    estimates: &[BezierCurve],
    targets: &[BezierCurve],
) -> Result<MatchMap, AssignError> {
    if targets.is_empty() {
        return Ok(MatchMap::unmatched(estimates.len(), 0));
    }
    let mut matched = Vec::with_capacity(estimates.len());
    for est in estimates {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (n, tgt) in targets.iter().enumerate() {
            let d = control_point_l1(est, tgt)?;
            if d < best_d {
                best_d = d;
                best = n;
            }
        }
        matched.push(Some(best));
    }
    Ok(MatchMap::from_assignments(matched, targets.len()))
}

/// Weight of the L1 term in the matching loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { lambda: 1.0 }
    }
}

fn clamped_neg_ln(p: f64) -> f64 {
    -p.clamp(PROB_EPS, 1.0 - PROB_EPS).ln()
}

/// Matching cost between one estimate slot and one ground-truth slot:
/// cross-entropy on the detection probability plus `lambda` times the L1
/// distance between the parameter vectors. When the ground-truth slot is
/// empty the cost is the no-detection cross-entropy alone.
pub fn training_match_cost(
    det_prob: f64,
    is_gt_present: bool,
    est_params: &[f64],
    gt_params: &[f64],
    cfg: &LossConfig,
) -> Result<f64, AssignError> {
    if !is_gt_present {
        return Ok(clamped_neg_ln(1.0 - det_prob));
    }
    if est_params.len() != gt_params.len() {
        return Err(AssignError::ParamLengthMismatch(
            est_params.len(),
            gt_params.len(),
        ));
    }
    let l1: f64 = est_params
        .iter()
        .zip(gt_params)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(clamped_neg_ln(det_prob) + cfg.lambda * l1)
}

/// Flip-invariant heading loss:
/// `|cos 2a - cos 2b| + |sin 2a - sin 2b|`. Zero exactly when the angles
/// agree modulo pi, so 180-degree box flips cost nothing.
pub fn angle_loss(alpha: f64, phi: f64) -> f64 {
    ((2.0 * alpha).cos() - (2.0 * phi).cos()).abs()
        + ((2.0 * alpha).sin() - (2.0 * phi).sin()).abs()
}

/// `-ln(probs[label])` with distribution checking and epsilon clamping.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64, AssignError> {
    if label >= probs.len() {
        return Err(AssignError::LabelOutOfRange(label, probs.len()));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(AssignError::NotADistribution(f64::NAN));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(AssignError::NotADistribution(sum));
    }
    Ok(clamped_neg_ln(probs[label]))
}

/// Ordered concatenation `[f_i, f_j]` feeding the association classifier;
/// order encodes edge direction.
pub fn association_input(f_i: &[f64], f_j: &[f64]) -> Result<Vec<f64>, AssignError> {
    if f_i.len() != f_j.len() {
        return Err(AssignError::FeatureLengthMismatch(f_i.len(), f_j.len()));
    }
    let mut out = Vec::with_capacity(2 * f_i.len());
    out.extend_from_slice(f_i);
    out.extend_from_slice(f_j);
    Ok(out)
}
