//! The directed lane graph: Bezier centerline vertices plus a binary
//! incidence matrix whose entry `(x, y)` records that centerline `y`
//! starts where centerline `x` ends.
//!
//! Ground-truth graphs additionally satisfy exact endpoint coincidence
//! along every edge; predicted graphs are allowed to miss that (and to
//! contain cycles, which validation reports as informational only).

use crate::curve::BezierCurve;
use crate::geom::Point2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// Endpoint coincidence tolerance for ground-truth validation, in
/// normalized coordinates.
pub const GT_ENDPOINT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("incidence side {side} does not match centerline count {curves}")]
    SizeMismatch { side: usize, curves: usize },
    #[error("edge ({0}, {1}) out of range for {2} centerlines")]
    EdgeOutOfRange(usize, usize, usize),
    #[error("centerline index {0} out of range for {1} centerlines")]
    IndexOutOfRange(usize, usize),
    #[error("detection probability list length {0} does not match centerline count {1}")]
    ProbabilityLengthMismatch(usize, usize),
}

/// Square binary connection matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    side: usize,
    bits: Vec<bool>,
}

impl IncidenceMatrix {
    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            bits: vec![false; side * side],
        }
    }

    pub fn from_pairs(side: usize, pairs: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut m = Self::zeros(side);
        for &(i, j) in pairs {
            if i >= side || j >= side {
                return Err(GraphError::EdgeOutOfRange(i, j, side));
            }
            m.set(i, j, true);
        }
        Ok(m)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.side + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.bits[i * self.side + j] = value;
    }

    /// All positive entries in row-major order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.side {
            for j in 0..self.side {
                if self.get(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// Severity of a validation finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    /// A broken invariant.
    Error,
    /// Allowed but noteworthy structure (cycles in predictions).
    Info,
}

/// One validation finding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    IncidenceSizeMismatch {
        side: usize,
        curves: usize,
    },
    DiagonalEntry {
        index: usize,
    },
    MutualEdge {
        a: usize,
        b: usize,
    },
    EndpointMismatch {
        from: usize,
        to: usize,
        distance: f64,
    },
    ProbabilityOutOfRange {
        index: usize,
        value: f64,
    },
    Cycle {
        through: usize,
    },
}

impl Diagnostic {
    pub fn severity(&self) -> Severity {
        match self {
            Diagnostic::Cycle { .. } => Severity::Info,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::IncidenceSizeMismatch { side, curves } => {
                write!(f, "incidence is {side}x{side} but the graph has {curves} centerlines")
            }
            Diagnostic::DiagonalEntry { index } => {
                write!(f, "self-connection on the diagonal at index {index}")
            }
            Diagnostic::MutualEdge { a, b } => {
                write!(f, "mutual connection between {a} and {b}")
            }
            Diagnostic::EndpointMismatch { from, to, distance } => write!(
                f,
                "edge ({from}, {to}) endpoints differ by {distance:.3e} (tolerance {GT_ENDPOINT_TOLERANCE:.0e})"
            ),
            Diagnostic::ProbabilityOutOfRange { index, value } => {
                write!(f, "detection probability {value} at index {index} outside [0, 1]")
            }
            Diagnostic::Cycle { through } => {
                write!(f, "directed cycle through centerline {through} (informational)")
            }
        }
    }
}

/// Directed graph of centerlines.
///
/// Serialized with the incidence matrix as a sparse edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SerializedGraph", into = "SerializedGraph")]
pub struct LaneGraph {
    centerlines: Vec<BezierCurve>,
    incidence: IncidenceMatrix,
    detection_probs: Option<Vec<f64>>,
    edge_probs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SerializedGraph {
    centerlines: Vec<BezierCurve>,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detection_probs: Option<Vec<f64>>,
    /// Per-edge association probabilities, aligned with `edges`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_probs: Option<Vec<f64>>,
}

impl TryFrom<SerializedGraph> for LaneGraph {
    type Error = GraphError;
    fn try_from(s: SerializedGraph) -> Result<Self, Self::Error> {
        let n = s.centerlines.len();
        let pairs: Vec<(usize, usize)> = s.edges.iter().map(|e| (e[0], e[1])).collect();
        let incidence = IncidenceMatrix::from_pairs(n, &pairs)?;
        if let Some(p) = &s.detection_probs {
            if p.len() != n {
                return Err(GraphError::ProbabilityLengthMismatch(p.len(), n));
            }
        }
        if let Some(p) = &s.edge_probs {
            if p.len() != s.edges.len() {
                return Err(GraphError::ProbabilityLengthMismatch(p.len(), s.edges.len()));
            }
        }
        Ok(LaneGraph {
            centerlines: s.centerlines,
            incidence,
            detection_probs: s.detection_probs,
            edge_probs: s.edge_probs,
        })
    }
}

impl From<LaneGraph> for SerializedGraph {
    fn from(g: LaneGraph) -> Self {
        let edges = g.incidence.pairs().iter().map(|&(i, j)| [i, j]).collect();
        SerializedGraph {
            centerlines: g.centerlines,
            edges,
            detection_probs: g.detection_probs,
            edge_probs: g.edge_probs,
        }
    }
}

impl LaneGraph {
    /// Graph with no connections.
    pub fn disconnected(centerlines: Vec<BezierCurve>) -> Self {
        let n = centerlines.len();
        Self {
            centerlines,
            incidence: IncidenceMatrix::zeros(n),
            detection_probs: None,
            edge_probs: None,
        }
    }

    pub fn new(
        centerlines: Vec<BezierCurve>,
        incidence: IncidenceMatrix,
    ) -> Result<Self, GraphError> {
        if incidence.side() != centerlines.len() {
            return Err(GraphError::SizeMismatch {
                side: incidence.side(),
                curves: centerlines.len(),
            });
        }
        Ok(Self {
            centerlines,
            incidence,
            detection_probs: None,
            edge_probs: None,
        })
    }

    /// Assemble without any shape checking; `validate` reports mismatches.
    pub fn from_parts(
        centerlines: Vec<BezierCurve>,
        incidence: IncidenceMatrix,
        detection_probs: Option<Vec<f64>>,
        edge_probs: Option<Vec<f64>>,
    ) -> Self {
        Self {
            centerlines,
            incidence,
            detection_probs,
            edge_probs,
        }
    }

    pub fn empty() -> Self {
        Self::disconnected(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.centerlines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centerlines.is_empty()
    }

    pub fn centerlines(&self) -> &[BezierCurve] {
        &self.centerlines
    }

    pub fn incidence(&self) -> &IncidenceMatrix {
        &self.incidence
    }

    pub fn detection_probs(&self) -> Option<&[f64]> {
        self.detection_probs.as_deref()
    }

    pub fn edge_probs(&self) -> Option<&[f64]> {
        self.edge_probs.as_deref()
    }

    pub fn with_detection_probs(mut self, probs: Vec<f64>) -> Result<Self, GraphError> {
        if probs.len() != self.centerlines.len() {
            return Err(GraphError::ProbabilityLengthMismatch(
                probs.len(),
                self.centerlines.len(),
            ));
        }
        self.detection_probs = Some(probs);
        Ok(self)
    }

    /// Per-edge probabilities aligned with `incidence().pairs()` order.
    pub fn with_edge_probs(mut self, probs: Vec<f64>) -> Result<Self, GraphError> {
        let edges = self.incidence.edge_count();
        if probs.len() != edges {
            return Err(GraphError::ProbabilityLengthMismatch(probs.len(), edges));
        }
        self.edge_probs = Some(probs);
        Ok(self)
    }
}

/// Check every graph invariant and return one diagnostic per violation.
///
/// Cycles are reported with `Severity::Info`: predictions are not required
/// to be acyclic.
pub fn validate(graph: &LaneGraph) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let n = graph.centerlines.len();
    let inc = &graph.incidence;

    if inc.side() != n {
        out.push(Diagnostic::IncidenceSizeMismatch {
            side: inc.side(),
            curves: n,
        });
        return out;
    }

    for i in 0..n {
        if inc.get(i, i) {
            out.push(Diagnostic::DiagonalEntry { index: i });
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if inc.get(i, j) && inc.get(j, i) {
                out.push(Diagnostic::MutualEdge { a: i, b: j });
            }
        }
    }
    for (i, j) in inc.pairs() {
        if i == j {
            continue;
        }
        let distance = graph.centerlines[i].end().dist(graph.centerlines[j].start());
        if distance > GT_ENDPOINT_TOLERANCE {
            out.push(Diagnostic::EndpointMismatch { from: i, to: j, distance });
        }
    }
    if let Some(probs) = &graph.detection_probs {
        for (index, &value) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                out.push(Diagnostic::ProbabilityOutOfRange { index, value });
            }
        }
    }

    // Cycle scan via iterative DFS coloring.
    let mut color = vec![0u8; n]; // 0 white, 1 gray, 2 black
    for start in 0..n {
        if color[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        color[start] = 1;
        while let Some(&(node, next)) = stack.last() {
            if next == n {
                color[node] = 2;
                stack.pop();
                continue;
            }
            stack.last_mut().unwrap().1 = next + 1;
            if !inc.get(node, next) {
                continue;
            }
            match color[next] {
                0 => {
                    color[next] = 1;
                    stack.push((next, 0));
                }
                1 => out.push(Diagnostic::Cycle { through: next }),
                _ => {}
            }
        }
    }
    out
}

/// True when `validate` finds no error-severity diagnostics.
pub fn is_valid(graph: &LaneGraph) -> bool {
    validate(graph)
        .iter()
        .all(|d| d.severity() != Severity::Error)
}

/// All connected pairs `(i, j)` in row-major order.
pub fn connected_pairs(graph: &LaneGraph) -> Vec<(usize, usize)> {
    graph.incidence.pairs()
}

/// A point where at least two centerline endpoints meet according to the
/// incidence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    /// Member endpoints as (centerline index, endpoint kind).
    pub members: Vec<(usize, EndpointKind)>,
    /// Arithmetic mean of the member endpoint positions.
    pub location: Point2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EndpointKind {
    Start,
    End,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Group endpoints into junctions induced by the incidence matrix.
///
/// Endpoint node layout: `2i` is the start of centerline `i`, `2i + 1` its
/// end. Every edge `(i, j)` merges end-of-`i` with start-of-`j`; the
/// groups are the connected components of that relation.
pub fn junctions(graph: &LaneGraph) -> Vec<Junction> {
    let n = graph.len();
    let mut uf = UnionFind::new(2 * n);
    for (i, j) in graph.incidence.pairs() {
        uf.union(2 * i + 1, 2 * j);
    }

    let mut groups: std::collections::BTreeMap<usize, Vec<(usize, EndpointKind)>> =
        std::collections::BTreeMap::new();
    for i in 0..n {
        let s = uf.find(2 * i);
        groups.entry(s).or_default().push((i, EndpointKind::Start));
        let e = uf.find(2 * i + 1);
        groups.entry(e).or_default().push((i, EndpointKind::End));
    }

    groups
        .into_values()
        .filter(|members| members.len() >= 2)
        .map(|members| {
            let mut sum = Point2::new(0.0, 0.0);
            for &(idx, kind) in &members {
                let p = match kind {
                    EndpointKind::Start => graph.centerlines[idx].start(),
                    EndpointKind::End => graph.centerlines[idx].end(),
                };
                sum = sum + p;
            }
            let location = sum * (1.0 / members.len() as f64);
            Junction { members, location }
        })
        .collect()
}

/// Snap the endpoints of incidence-connected centerlines to their junction
/// mean. The incidence matrix is untouched, so the directed graph itself
/// does not change; only endpoint control points move.
pub fn merge_junctions(graph: &LaneGraph) -> LaneGraph {
    let mut merged = graph.clone();
    for junction in junctions(graph) {
        for (idx, kind) in junction.members {
            match kind {
                EndpointKind::Start => merged.centerlines[idx].set_start(junction.location),
                EndpointKind::End => merged.centerlines[idx].set_end(junction.location),
            }
        }
    }
    merged
}

/// Indices reachable from `start` by directed edges, including `start`.
pub fn subgraph_reachable(graph: &LaneGraph, start: usize) -> Result<BTreeSet<usize>, GraphError> {
    let n = graph.len();
    if start >= n {
        return Err(GraphError::IndexOutOfRange(start, n));
    }
    let mut seen = BTreeSet::new();
    let mut stack = vec![start];
    while let Some(i) = stack.pop() {
        if !seen.insert(i) {
            continue;
        }
        for j in 0..n {
            if graph.incidence.get(i, j) && !seen.contains(&j) {
                stack.push(j);
            }
        }
    }
    Ok(seen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::BezierCurve;

    fn seg(a: (f64, f64), b: (f64, f64)) -> BezierCurve {
        BezierCurve::new(vec![
            Point2::new(a.0, a.1),
            Point2::new((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0),
            Point2::new(b.0, b.1),
        ])
        .unwrap()
    }

    fn chain(points: &[(f64, f64)]) -> LaneGraph {
        let curves: Vec<BezierCurve> = points.windows(2).map(|w| seg(w[0], w[1])).collect();
        let n = curves.len();
        let pairs: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        LaneGraph::new(curves, IncidenceMatrix::from_pairs(n, &pairs).unwrap()).unwrap()
    }

    #[test]
    fn empty_graph_is_valid() {
        assert!(validate(&LaneGraph::empty()).is_empty());
    }

    #[test]
    fn self_loop_is_flagged() {
        let mut inc = IncidenceMatrix::zeros(1);
        inc.set(0, 0, true);
        let g = LaneGraph::new(vec![seg((0.0, 0.0), (0.5, 0.5))], inc).unwrap();
        let d = validate(&g);
        assert_eq!(d.len(), 1);
        assert!(matches!(d[0], Diagnostic::DiagonalEntry { index: 0 }));
    }

    #[test]
    fn shared_endpoint_edge_is_clean() {
        let g = chain(&[(0.1, 0.1), (0.5, 0.5), (0.9, 0.6)]);
        assert!(validate(&g).is_empty());
        assert_eq!(connected_pairs(&g), vec![(0, 1)]);
    }

    #[test]
    fn mismatched_endpoints_are_flagged() {
        let a = seg((0.0, 0.0), (0.5, 0.5));
        let b = seg((0.6, 0.5), (1.0, 1.0));
        let inc = IncidenceMatrix::from_pairs(2, &[(0, 1)]).unwrap();
        let g = LaneGraph::new(vec![a, b], inc).unwrap();
        let d = validate(&g);
        assert_eq!(d.len(), 1);
        assert!(matches!(d[0], Diagnostic::EndpointMismatch { from: 0, to: 1, .. }));
    }

    #[test]
    fn mutual_edge_and_size_mismatch() {
        let a = seg((0.0, 0.0), (0.5, 0.5));
        let b = seg((0.5, 0.5), (0.0, 0.0));
        let inc = IncidenceMatrix::from_pairs(2, &[(0, 1), (1, 0)]).unwrap();
        let g = LaneGraph::new(vec![a.clone(), b], inc).unwrap();
        let d = validate(&g);
        assert!(d.iter().any(|x| matches!(x, Diagnostic::MutualEdge { a: 0, b: 1 })));
        // Mutual edges between two nodes are also a 2-cycle.
        assert!(d.iter().any(|x| matches!(x, Diagnostic::Cycle { .. })));

        let g = LaneGraph::from_parts(vec![a], IncidenceMatrix::zeros(3), None, None);
        let d = validate(&g);
        assert!(matches!(d[0], Diagnostic::IncidenceSizeMismatch { side: 3, curves: 1 }));
    }

    #[test]
    fn cycles_are_informational() {
        let a = seg((0.0, 0.0), (0.5, 0.5));
        let b = seg((0.5, 0.5), (0.0, 0.0));
        let inc = IncidenceMatrix::from_pairs(2, &[(0, 1), (1, 0)]).unwrap();
        let g = LaneGraph::new(vec![a, b], inc).unwrap();
        let cycles: Vec<_> = validate(&g)
            .into_iter()
            .filter(|d| matches!(d, Diagnostic::Cycle { .. }))
            .collect();
        assert!(!cycles.is_empty());
        assert!(cycles.iter().all(|d| d.severity() == Severity::Info));
    }

    #[test]
    fn connected_pairs_reads_out_rows() {
        assert!(connected_pairs(&LaneGraph::disconnected(vec![
            seg((0.0, 0.0), (1.0, 1.0)),
            seg((0.2, 0.0), (0.9, 1.0)),
        ]))
        .is_empty());

        let g = chain(&[(0.0, 0.0), (0.2, 0.2), (0.4, 0.4), (0.6, 0.6), (0.8, 0.8), (1.0, 1.0)]);
        assert_eq!(g.len(), 5);
        assert_eq!(connected_pairs(&g), vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
    }

    #[test]
    fn merge_edgeless_graph_is_identity() {
        let g = LaneGraph::disconnected(vec![seg((0.0, 0.0), (1.0, 1.0))]);
        assert_eq!(merge_junctions(&g), g);
    }

    #[test]
    fn merge_snaps_pair_to_mean() {
        let a = seg((0.1, 0.1), (0.50, 0.50));
        let b = seg((0.52, 0.50), (0.9, 0.6));
        let inc = IncidenceMatrix::from_pairs(2, &[(0, 1)]).unwrap();
        let g = LaneGraph::new(vec![a, b], inc).unwrap();
        let merged = merge_junctions(&g);
        assert_eq!(merged.centerlines()[0].end(), Point2::new(0.51, 0.50));
        assert_eq!(merged.centerlines()[1].start(), Point2::new(0.51, 0.50));
        assert_eq!(merged.incidence(), g.incidence());
    }

    #[test]
    fn merge_y_junction_uses_three_point_mean() {
        // A -> C and B -> C with three distinct meeting endpoints.
        let a = seg((0.1, 0.1), (0.40, 0.50));
        let b = seg((0.9, 0.1), (0.46, 0.50));
        let c = seg((0.43, 0.53), (0.5, 0.9));
        let inc = IncidenceMatrix::from_pairs(3, &[(0, 2), (1, 2)]).unwrap();
        let g = LaneGraph::new(vec![a, b, c], inc).unwrap();
        let merged = merge_junctions(&g);
        let mean = Point2::new((0.40 + 0.46 + 0.43) / 3.0, (0.50 + 0.50 + 0.53) / 3.0);
        assert_eq!(merged.centerlines()[0].end(), mean);
        assert_eq!(merged.centerlines()[1].end(), mean);
        assert_eq!(merged.centerlines()[2].start(), mean);
    }

    #[test]
    fn merge_is_idempotent_and_exact() {
        let a = seg((0.1, 0.1), (0.50, 0.50));
        let b = seg((0.52, 0.50), (0.9, 0.6));
        let c = seg((0.9, 0.6), (0.95, 0.95));
        let inc = IncidenceMatrix::from_pairs(3, &[(0, 1), (1, 2)]).unwrap();
        let g = LaneGraph::new(vec![a, b, c], inc).unwrap();
        let once = merge_junctions(&g);
        let twice = merge_junctions(&once);
        assert_eq!(once, twice);
        for (i, j) in connected_pairs(&once) {
            assert_eq!(once.centerlines()[i].end(), once.centerlines()[j].start());
        }
    }

    #[test]
    fn reachability() {
        let g = chain(&[(0.0, 0.0), (0.3, 0.3), (0.6, 0.6), (0.9, 0.9)]);
        assert_eq!(
            subgraph_reachable(&g, 0).unwrap(),
            BTreeSet::from([0, 1, 2])
        );
        assert_eq!(subgraph_reachable(&g, 2).unwrap(), BTreeSet::from([2]));
        assert!(matches!(
            subgraph_reachable(&g, 9),
            Err(GraphError::IndexOutOfRange(9, 3))
        ));

        // Diamond 0->1, 0->2, 1->3, 2->3.
        let curves = vec![
            seg((0.5, 0.0), (0.3, 0.3)),
            seg((0.3, 0.3), (0.5, 0.6)),
            seg((0.3, 0.3), (0.1, 0.6)),
            seg((0.5, 0.6), (0.5, 0.9)),
        ];
        let inc = IncidenceMatrix::from_pairs(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap();
        let g = LaneGraph::new(curves, inc).unwrap();
        assert_eq!(
            subgraph_reachable(&g, 0).unwrap(),
            BTreeSet::from([0, 1, 2, 3])
        );
    }

    #[test]
    fn serde_uses_sparse_edges() {
        let g = chain(&[(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)]);
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.contains("\"edges\":[[0,1]]"));
        let back: LaneGraph = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);

        let bad = r#"{"centerlines":[],"edges":[[0,1]]}"#;
        assert!(serde_json::from_str::<LaneGraph>(bad).is_err());
    }
}
