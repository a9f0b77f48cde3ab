//! Bezier centerlines: evaluation, Bernstein basis matrices, least-squares
//! control-point fitting, dense sampling, and the direction-sensitive
//! control-point distance.
//!
//! A centerline is a 2D Bezier curve over `t in [0, 1]` given by `R`
//! control points (degree `n = R - 1`). Fitting observed points is a
//! linear least-squares problem once each observation is assigned a
//! parameter value; uniform parameter spacing is the default because the
//! ground-truth pipeline resamples polylines at a fixed BEV resolution
//! before fitting.

use crate::geom::Point2;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Condition-number cutoff above which fitting switches from normal
/// equations to an SVD solve.
const NORMAL_EQ_CONDITION_LIMIT: f64 = 1e8;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("curve parameter t={0} outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("a Bezier curve needs at least 2 control points, got {0}")]
    TooFewControlPoints(usize),
    #[error("basis matrix needs at least one parameter value")]
    EmptyParameters,
    #[error("degree must be >= 1, got {0}")]
    InvalidDegree(usize),
    #[error("sampling needs count >= 2, got {0}")]
    InvalidSampleCount(usize),
    #[error("fitting degree {degree} needs at least {needed} points, got {got}")]
    TooFewPoints {
        degree: usize,
        needed: usize,
        got: usize,
    },
    #[error("control point count mismatch: {0} vs {1}")]
    ControlPointMismatch(usize, usize),
    #[error("rank-deficient basis: {0}")]
    RankDeficient(String),
    #[error("polyline needs at least 2 points, got {0}")]
    DegeneratePolyline(usize),
}

/// An ordered list of 2D control points defining one centerline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point2>", into = "Vec<Point2>")]
pub struct BezierCurve {
    control_points: Vec<Point2>,
}

impl BezierCurve {
    pub fn new(control_points: Vec<Point2>) -> Result<Self, CurveError> {
        if control_points.len() < 2 {
            return Err(CurveError::TooFewControlPoints(control_points.len()));
        }
        Ok(Self { control_points })
    }

    pub fn control_points(&self) -> &[Point2] {
        &self.control_points
    }

    /// Number of control points `R`.
    pub fn point_count(&self) -> usize {
        self.control_points.len()
    }

    /// Polynomial degree `n = R - 1`.
    pub fn degree(&self) -> usize {
        self.control_points.len() - 1
    }

    pub fn start(&self) -> Point2 {
        self.control_points[0]
    }

    pub fn end(&self) -> Point2 {
        *self.control_points.last().unwrap()
    }

    pub(crate) fn set_start(&mut self, p: Point2) {
        self.control_points[0] = p;
    }

    pub(crate) fn set_end(&mut self, p: Point2) {
        *self.control_points.last_mut().unwrap() = p;
    }

    /// Componentwise clamp of every control point into the unit square.
    pub fn clamp_unit(&self) -> BezierCurve {
        BezierCurve {
            control_points: self.control_points.iter().map(|p| p.clamp_unit()).collect(),
        }
    }

    /// Translate every control point by `delta`.
    pub fn translate(&self, delta: Point2) -> BezierCurve {
        BezierCurve {
            control_points: self.control_points.iter().map(|&p| p + delta).collect(),
        }
    }
}

impl TryFrom<Vec<Point2>> for BezierCurve {
    type Error = CurveError;
    fn try_from(v: Vec<Point2>) -> Result<Self, Self::Error> {
        BezierCurve::new(v)
    }
}

impl From<BezierCurve> for Vec<Point2> {
    fn from(c: BezierCurve) -> Self {
        c.control_points
    }
}

/// An ordered list of observed 2D points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<Point2>,
}

impl Polyline {
    pub fn new(points: Vec<Point2>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total arc length of the segment chain.
    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].dist(w[1])).sum()
    }
}

/// Bernstein weight matrix: one row per parameter value, one column per
/// control point. Every row sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    weights: DMatrix<f64>,
}

impl BasisMatrix {
    pub fn rows(&self) -> usize {
        self.weights.nrows()
    }

    pub fn cols(&self) -> usize {
        self.weights.ncols()
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.weights[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.weights
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    // Multiplicative form; exact in f64 for the small n used here.
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Bernstein weights of degree `n` at parameter `t`.
fn bernstein_row(t: f64, degree: usize) -> Vec<f64> {
    (0..=degree)
        .map(|j| {
            binomial(degree, j)
                * (1.0 - t).powi((degree - j) as i32)
                * t.powi(j as i32)
        })
        .collect()
}

/// Evaluate the curve at `t`: the Bernstein-weighted sum of control points.
pub fn eval_bezier(curve: &BezierCurve, t: f64) -> Result<Point2, CurveError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(CurveError::ParameterOutOfRange(t));
    }
    let weights = bernstein_row(t, curve.degree());
    let mut acc = Point2::new(0.0, 0.0);
    for (w, p) in weights.iter().zip(curve.control_points()) {
        acc = acc + *p * *w;
    }
    Ok(acc)
}

/// Build the Bernstein weight matrix for the given parameter values.
pub fn basis_matrix(ts: &[f64], degree: usize) -> Result<BasisMatrix, CurveError> {
    if ts.is_empty() {
        return Err(CurveError::EmptyParameters);
    }
    if degree < 1 {
        return Err(CurveError::InvalidDegree(degree));
    }
    for &t in ts {
        if !(0.0..=1.0).contains(&t) {
            return Err(CurveError::ParameterOutOfRange(t));
        }
    }
    let mut weights = DMatrix::zeros(ts.len(), degree + 1);
    for (i, &t) in ts.iter().enumerate() {
        for (j, w) in bernstein_row(t, degree).into_iter().enumerate() {
            weights[(i, j)] = w;
        }
    }
    Ok(BasisMatrix { weights })
}

/// Evaluate the curve at `count` uniformly spaced parameters including
/// both endpoints.
pub fn sample_curve(curve: &BezierCurve, count: usize) -> Result<Polyline, CurveError> {
    if count < 2 {
        return Err(CurveError::InvalidSampleCount(count));
    }
    let points = (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            eval_bezier(curve, t).expect("uniform t is in range")
        })
        .collect();
    Ok(Polyline::new(points))
}

/// How observed points are assigned parameter values before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    /// `t_i = i / (T - 1)`; correct for polylines resampled at a fixed
    /// spatial resolution.
    #[default]
    Uniform,
    /// `t_i` proportional to cumulative chord length.
    ChordLength,
}

fn parameter_values(points: &[Point2], mode: Parameterization) -> Vec<f64> {
    let n = points.len();
    match mode {
        Parameterization::Uniform => {
            (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
        }
        Parameterization::ChordLength => {
            let mut cum = Vec::with_capacity(n);
            cum.push(0.0);
            for w in points.windows(2) {
                cum.push(cum.last().unwrap() + w[0].dist(w[1]));
            }
            let total = *cum.last().unwrap();
            if total <= 0.0 {
                return (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            }
            cum.into_iter().map(|s| (s / total).clamp(0.0, 1.0)).collect()
        }
    }
}

/// Least-squares control points for the observed polyline with uniform
/// parameter spacing.
pub fn fit_bezier(points: &Polyline, degree: usize) -> Result<BezierCurve, CurveError> {
    fit_bezier_with(points, degree, Parameterization::Uniform)
}

/// Least-squares control points with an explicit parameterization.
///
/// Solves the normal equations; when the basis is badly conditioned the
/// solve falls back to an SVD pseudo-inverse, and an effectively singular
/// basis (e.g. duplicated parameter values collapsing rank) is an error.
pub fn fit_bezier_with(
    points: &Polyline,
    degree: usize,
    mode: Parameterization,
) -> Result<BezierCurve, CurveError> {
    if degree < 1 {
        return Err(CurveError::InvalidDegree(degree));
    }
    let needed = degree + 1;
    if points.len() < needed {
        return Err(CurveError::TooFewPoints {
            degree,
            needed,
            got: points.len(),
        });
    }

    let ts = parameter_values(&points.points, mode);
    let basis = basis_matrix(&ts, degree)?;
    let gamma = basis.as_matrix();

    let svd = gamma.clone().svd(false, false);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    if sigma_min <= sigma_max * 1e-12 {
        return Err(CurveError::RankDeficient(format!(
            "singular values span [{sigma_min:.3e}, {sigma_max:.3e}]; \
             parameter values do not determine {needed} control points"
        )));
    }

    let rhs_x = DVector::from_iterator(points.len(), points.points.iter().map(|p| p.x));
    let rhs_y = DVector::from_iterator(points.len(), points.points.iter().map(|p| p.y));

    let (sol_x, sol_y) = if sigma_max / sigma_min <= NORMAL_EQ_CONDITION_LIMIT {
        let gram = gamma.transpose() * gamma;
        let chol = gram
            .cholesky()
            .ok_or_else(|| CurveError::RankDeficient("Gram matrix not positive definite".into()))?;
        (
            chol.solve(&(gamma.transpose() * &rhs_x)),
            chol.solve(&(gamma.transpose() * &rhs_y)),
        )
    } else {
        let full = gamma.clone().svd(true, true);
        (
            full.solve(&rhs_x, 1e-12).map_err(|e| CurveError::RankDeficient(e.to_string()))?,
            full.solve(&rhs_y, 1e-12).map_err(|e| CurveError::RankDeficient(e.to_string()))?,
        )
    };

    let control_points = (0..needed)
        .map(|k| Point2::new(sol_x[k], sol_y[k]))
        .collect();
    BezierCurve::new(control_points)
}

/// Fit residual: Frobenius norm of the pointwise error for a given
/// curve/polyline pair under uniform parameterization.
pub fn fit_residual(curve: &BezierCurve, points: &Polyline) -> f64 {
    let n = points.len();
    let mut acc = 0.0;
    for (i, p) in points.points.iter().enumerate() {
        let t = i as f64 / (n - 1) as f64;
        let q = eval_bezier(curve, t).expect("uniform t is in range");
        let d = *p - q;
        acc += d.dot(d);
    }
    acc.sqrt()
}

/// Sum of absolute coordinate differences over ordered control points.
///
/// Direction matters: reversing a curve's control points moves it far
/// away under this distance even though the traced point set is the same.
pub fn control_point_l1(a: &BezierCurve, b: &BezierCurve) -> Result<f64, CurveError> {
    if a.point_count() != b.point_count() {
        return Err(CurveError::ControlPointMismatch(
            a.point_count(),
            b.point_count(),
        ));
    }
    Ok(a.control_points()
        .iter()
        .zip(b.control_points())
        .map(|(p, q)| p.l1_dist(*q))
        .sum())
}

/// The same trace with start and end swapped: control points in reverse
/// order.
pub fn reverse(curve: &BezierCurve) -> BezierCurve {
    let mut pts = curve.control_points().to_vec();
    pts.reverse();
    BezierCurve::new(pts).expect("reversal preserves length")
}
