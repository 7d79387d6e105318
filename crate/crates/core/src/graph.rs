//! Problem instances, feasible labelings and ground truth.
//!
//! Class, node and segment ids are zero-based everywhere in this crate. Text
//! formats in `amwc-tools` shift classes and segments to one-based ids.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type ClassId = usize;
pub type SegmentId = usize;

/// A single problem with an invariant broken.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphViolation {
    EmptyGraph,
    NoClasses,
    SelfLoop { edge: usize, node: NodeId },
    DuplicateEdge { edge: usize, i: NodeId, j: NodeId },
    UnsortedEdge { edge: usize },
    IndexOutOfRange { edge: usize, node: NodeId },
    NonFiniteNodeCost { node: NodeId, class: ClassId },
    NonFiniteEdgeCost { edge: usize },
    ClassOutOfRange { class: ClassId },
    NodeCostShape { expected: usize, found: usize },
    EdgeCostShape { expected: usize, found: usize },
}

impl fmt::Display for GraphViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyGraph => write!(f, "empty graph: num_nodes must be positive"),
            Self::NoClasses => write!(f, "no classes: num_classes must be positive"),
            Self::SelfLoop { edge, node } => write!(f, "self-loop at edge {edge} ({node}, {node})"),
            Self::DuplicateEdge { edge, i, j } => {
                write!(f, "duplicate edge at edge {edge} ({i}, {j})")
            }
            Self::UnsortedEdge { edge } => {
                write!(f, "unsorted edges: edge {edge} is not in lexicographic order or has i > j")
            }
            Self::IndexOutOfRange { edge, node } => {
                write!(f, "index out of range: edge {edge} references node {node}")
            }
            Self::NonFiniteNodeCost { node, class } => {
                write!(f, "non-finite cost at node {node}, class {class}")
            }
            Self::NonFiniteEdgeCost { edge } => write!(f, "non-finite cost at edge {edge}"),
            Self::ClassOutOfRange { class } => {
                write!(f, "class out of range: partitionable class {class}")
            }
            Self::NodeCostShape { expected, found } => {
                write!(f, "node cost table has {found} entries, expected {expected}")
            }
            Self::EdgeCostShape { expected, found } => {
                write!(f, "edge cost vector has {found} entries, expected {expected}")
            }
        }
    }
}

/// Every invariant violation found while validating a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphError {
    pub violations: Vec<GraphViolation>,
}

impl core::error::Error for GraphError {}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, v) in self.violations.iter().enumerate() {
            if n > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// An AMWC instance: graph, node costs per class, edge costs and the set of
/// partitionable classes.
///
/// A positive edge cost is attractive: cutting the edge adds that cost to the
/// objective.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGraph {
    num_nodes: usize,
    num_classes: usize,
    edges: Vec<(NodeId, NodeId)>,
    node_costs: Vec<f64>,
    edge_costs: Vec<f64>,
    partitionable: Vec<bool>,
}

/// Checks all `CostGraph` invariants on raw parts and reports every violation.
pub fn validate_graph(
    num_nodes: usize,
    num_classes: usize,
    edges: &[(NodeId, NodeId)],
    node_costs: &[f64],
    edge_costs: &[f64],
    partitionable: &[ClassId],
) -> core::result::Result<(), GraphError> {
    let mut violations = Vec::new();
    if num_nodes == 0 {
        violations.push(GraphViolation::EmptyGraph);
    }
    if num_classes == 0 {
        violations.push(GraphViolation::NoClasses);
    }
    for (e, &(i, j)) in edges.iter().enumerate() {
        if i == j {
            violations.push(GraphViolation::SelfLoop { edge: e, node: i });
        }
        for node in [i, j] {
            if node >= num_nodes {
                violations.push(GraphViolation::IndexOutOfRange { edge: e, node });
            }
        }
        if i > j {
            violations.push(GraphViolation::UnsortedEdge { edge: e });
        }
        if e > 0 {
            let prev = edges[e - 1];
            if prev == (i, j) {
                violations.push(GraphViolation::DuplicateEdge { edge: e, i, j });
            } else if prev > (i, j) {
                violations.push(GraphViolation::UnsortedEdge { edge: e });
            }
        }
    }
    let expected = num_nodes * num_classes;
    if node_costs.len() != expected {
        violations.push(GraphViolation::NodeCostShape { expected, found: node_costs.len() });
    } else if num_classes > 0 {
        for (idx, c) in node_costs.iter().enumerate() {
            if !c.is_finite() {
                violations.push(GraphViolation::NonFiniteNodeCost {
                    node: idx / num_classes,
                    class: idx % num_classes,
                });
            }
        }
    }
    if edge_costs.len() != edges.len() {
        violations.push(GraphViolation::EdgeCostShape {
            expected: edges.len(),
            found: edge_costs.len(),
        });
    }
    for (e, c) in edge_costs.iter().enumerate() {
        if !c.is_finite() {
            violations.push(GraphViolation::NonFiniteEdgeCost { edge: e });
        }
    }
    for &k in partitionable {
        if k >= num_classes {
            violations.push(GraphViolation::ClassOutOfRange { class: k });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(GraphError { violations })
    }
}

impl CostGraph {
    /// Builds a validated instance. `node_costs` is row-major, one row of
    /// `num_classes` costs per node.
    pub fn new(
        num_nodes: usize,
        num_classes: usize,
        edges: Vec<(NodeId, NodeId)>,
        node_costs: Vec<f64>,
        edge_costs: Vec<f64>,
        partitionable: &[ClassId],
    ) -> Result<Self> {
        validate_graph(num_nodes, num_classes, &edges, &node_costs, &edge_costs, partitionable)?;
        let mut mask = vec![false; num_classes];
        for &k in partitionable {
            mask[k] = true;
        }
        Ok(Self {
            num_nodes,
            num_classes,
            edges,
            node_costs,
            edge_costs,
            partitionable: mask,
        })
    }

    /// Same topology and partitionable set with new costs.
    pub fn with_costs(&self, node_costs: Vec<f64>, edge_costs: Vec<f64>) -> Result<Self> {
        let mut violations = Vec::new();
        let expected = self.num_nodes * self.num_classes;
        if node_costs.len() != expected {
            violations.push(GraphViolation::NodeCostShape { expected, found: node_costs.len() });
        }
        if edge_costs.len() != self.edges.len() {
            violations.push(GraphViolation::EdgeCostShape {
                expected: self.edges.len(),
                found: edge_costs.len(),
            });
        }
        if violations.is_empty() {
            for (idx, c) in node_costs.iter().enumerate() {
                if !c.is_finite() {
                    violations.push(GraphViolation::NonFiniteNodeCost {
                        node: idx / self.num_classes,
                        class: idx % self.num_classes,
                    });
                }
            }
            for (e, c) in edge_costs.iter().enumerate() {
                if !c.is_finite() {
                    violations.push(GraphViolation::NonFiniteEdgeCost { edge: e });
                }
            }
        }
        if !violations.is_empty() {
            return Err(GraphError { violations }.into());
        }
        Ok(Self {
            num_nodes: self.num_nodes,
            num_classes: self.num_classes,
            edges: self.edges.clone(),
            node_costs,
            edge_costs,
            partitionable: self.partitionable.clone(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    /// Row-major `num_nodes × num_classes` cost table.
    pub fn node_costs(&self) -> &[f64] {
        &self.node_costs
    }

    pub fn node_row(&self, node: NodeId) -> &[f64] {
        let k = self.num_classes;
        &self.node_costs[node * k..(node + 1) * k]
    }

    pub fn node_cost(&self, node: NodeId, class: ClassId) -> f64 {
        self.node_costs[node * self.num_classes + class]
    }

    pub fn edge_costs(&self) -> &[f64] {
        &self.edge_costs
    }

    pub fn is_partitionable(&self, class: ClassId) -> bool {
        self.partitionable[class]
    }

    pub fn partitionable_classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.partitionable.iter().enumerate().filter(|(_, &p)| p).map(|(k, _)| k)
    }

    /// Index of edge `(i, j)` (`i < j`) by binary search.
    pub fn edge_index(&self, i: NodeId, j: NodeId) -> Option<usize> {
        self.edges.binary_search(&(i, j)).ok()
    }
}

/// Ways a labeling can break the AMWC constraints.
#[derive(Debug, Clone, PartialEq)]
pub enum Infeasibility {
    Shape(&'static str),
    ClassOutOfRange { node: NodeId },
    SegmentOutOfRange { node: NodeId },
    /// `y(ij) = 1` must hold exactly when `z(i) != z(j)`.
    CutSegmentMismatch { edge: usize },
    /// Same non-partitionable class on both ends but the edge is cut.
    NonPartitionableCut { edge: usize },
    /// Different classes on both ends but the edge is not cut.
    ClassBoundaryNotCut { edge: usize },
    /// `x(i) != m(z(i))`.
    SegmentClassMismatch { node: NodeId },
    /// Two segments share a non-partitionable class.
    SplitNonPartitionable { class: ClassId },
}

impl core::error::Error for Infeasibility {}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Shape(what) => write!(f, "labeling shape mismatch: {what}"),
            Self::ClassOutOfRange { node } => write!(f, "class of node {node} out of range"),
            Self::SegmentOutOfRange { node } => write!(f, "segment of node {node} out of range"),
            Self::CutSegmentMismatch { edge } => {
                write!(f, "edge {edge}: cut indicator disagrees with segment ids")
            }
            Self::NonPartitionableCut { edge } => {
                write!(f, "edge {edge}: non-partitionable class cut internally")
            }
            Self::ClassBoundaryNotCut { edge } => {
                write!(f, "edge {edge}: class boundary without cut")
            }
            Self::SegmentClassMismatch { node } => {
                write!(f, "node {node}: class differs from its segment's class")
            }
            Self::SplitNonPartitionable { class } => {
                write!(f, "non-partitionable class {class} has more than one segment")
            }
        }
    }
}

/// A solution: class per node (x), cut indicator per edge (y), segment per
/// node (z), class per segment (m) and the objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    pub classes: Vec<ClassId>,
    pub cut: Vec<bool>,
    pub segments: Vec<SegmentId>,
    pub segment_classes: Vec<ClassId>,
    pub objective: f64,
}

impl Labeling {
    /// Builds a labeling from a cluster assignment. `cluster_of[i]` is any
    /// cluster key below `num_nodes`; segments are renumbered densely in
    /// order of first occurrence. `class_of_cluster` maps a key to its class.
    pub fn from_clusters(
        g: &CostGraph,
        cluster_of: &[usize],
        class_of_cluster: impl Fn(usize) -> ClassId,
    ) -> Self {
        let n = g.num_nodes();
        debug_assert_eq!(cluster_of.len(), n);
        let mut dense = vec![usize::MAX; cluster_of.iter().copied().max().map_or(0, |m| m + 1)];
        let mut segment_classes = Vec::new();
        let mut segments = Vec::with_capacity(n);
        for &c in cluster_of {
            if dense[c] == usize::MAX {
                dense[c] = segment_classes.len();
                segment_classes.push(class_of_cluster(c));
            }
            segments.push(dense[c]);
        }
        let classes: Vec<ClassId> = segments.iter().map(|&s| segment_classes[s]).collect();
        let cut: Vec<bool> = g.edges().iter().map(|&(i, j)| segments[i] != segments[j]).collect();
        let objective = evaluate(g, &classes, &cut);
        Self { classes, cut, segments, segment_classes, objective }
    }

    pub fn num_segments(&self) -> usize {
        self.segment_classes.len()
    }
}

/// `Σ_i c_V(i, x(i)) + Σ_ij c_E(ij) y(ij)` without any feasibility check.
pub fn evaluate(g: &CostGraph, classes: &[ClassId], cut: &[bool]) -> f64 {
    let mut total = 0.0;
    for (i, &k) in classes.iter().enumerate() {
        total += g.node_cost(i, k);
    }
    for (c, &y) in g.edge_costs().iter().zip(cut) {
        if y {
            total += c;
        }
    }
    total
}

/// Checks every labeling invariant against `g`.
pub fn check_feasibility(g: &CostGraph, lab: &Labeling) -> core::result::Result<(), Infeasibility> {
    let n = g.num_nodes();
    if lab.classes.len() != n {
        return Err(Infeasibility::Shape("class vector length"));
    }
    if lab.segments.len() != n {
        return Err(Infeasibility::Shape("segment vector length"));
    }
    if lab.cut.len() != g.num_edges() {
        return Err(Infeasibility::Shape("cut vector length"));
    }
    let num_segments = lab.segment_classes.len();
    for i in 0..n {
        if lab.classes[i] >= g.num_classes() {
            return Err(Infeasibility::ClassOutOfRange { node: i });
        }
        if lab.segments[i] >= num_segments {
            return Err(Infeasibility::SegmentOutOfRange { node: i });
        }
        if lab.segment_classes[lab.segments[i]] != lab.classes[i] {
            return Err(Infeasibility::SegmentClassMismatch { node: i });
        }
    }
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        let y = lab.cut[e];
        if y != (lab.segments[i] != lab.segments[j]) {
            return Err(Infeasibility::CutSegmentMismatch { edge: e });
        }
        let (xi, xj) = (lab.classes[i], lab.classes[j]);
        if xi == xj && !g.is_partitionable(xi) && y {
            return Err(Infeasibility::NonPartitionableCut { edge: e });
        }
        if xi != xj && !y {
            return Err(Infeasibility::ClassBoundaryNotCut { edge: e });
        }
    }
    let mut stuff_segment = vec![usize::MAX; g.num_classes()];
    let used: BTreeSet<SegmentId> = lab.segments.iter().copied().collect();
    for s in used {
        let k = lab.segment_classes[s];
        if g.is_partitionable(k) {
            continue;
        }
        if stuff_segment[k] != usize::MAX && stuff_segment[k] != s {
            return Err(Infeasibility::SplitNonPartitionable { class: k });
        }
        stuff_segment[k] = s;
    }
    Ok(())
}

/// Objective of a feasible labeling.
pub fn objective(g: &CostGraph, lab: &Labeling) -> Result<f64> {
    check_feasibility(g, lab)?;
    Ok(evaluate(g, &lab.classes, &lab.cut))
}

/// Edges of an `height × width` grid joining pixels at each horizontal and
/// vertical distance in `distances`. Node index is `r * width + c`; the
/// result is sorted and free of duplicates.
pub fn grid_graph(height: usize, width: usize, distances: &[usize]) -> Vec<(NodeId, NodeId)> {
    let dists: BTreeSet<usize> = distances.iter().copied().filter(|&d| d >= 1).collect();
    let mut edges = Vec::new();
    for r in 0..height {
        for c in 0..width {
            let i = r * width + c;
            for &d in &dists {
                if c + d < width {
                    edges.push((i, i + d));
                }
                if r + d < height {
                    edges.push((i, i + d * width));
                }
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Reference panoptic labeling with per-class area thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    segments: Vec<SegmentId>,
    segment_classes: Vec<ClassId>,
    area_thresholds: Vec<f64>,
}

impl GroundTruth {
    /// `area_thresholds` has one entry per class and fixes the class count.
    pub fn new(
        segments: Vec<SegmentId>,
        segment_classes: Vec<ClassId>,
        area_thresholds: Vec<f64>,
    ) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidGroundTruth("no nodes"));
        }
        if segments.iter().any(|&s| s >= segment_classes.len()) {
            return Err(Error::InvalidGroundTruth("segment id without a class"));
        }
        if segment_classes.iter().any(|&k| k >= area_thresholds.len()) {
            return Err(Error::InvalidGroundTruth("segment class out of range"));
        }
        if area_thresholds.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidGroundTruth("area threshold must be positive"));
        }
        Ok(Self { segments, segment_classes, area_thresholds })
    }

    pub fn num_nodes(&self) -> usize {
        self.segments.len()
    }

    pub fn num_classes(&self) -> usize {
        self.area_thresholds.len()
    }

    pub fn segments(&self) -> &[SegmentId] {
        &self.segments
    }

    pub fn segment_classes(&self) -> &[ClassId] {
        &self.segment_classes
    }

    pub fn area_thresholds(&self) -> &[f64] {
        &self.area_thresholds
    }

    pub fn area_threshold(&self, class: ClassId) -> f64 {
        self.area_thresholds[class]
    }

    /// Class per node.
    pub fn node_classes(&self) -> Vec<ClassId> {
        self.segments.iter().map(|&s| self.segment_classes[s]).collect()
    }

    /// Cut indicator per edge: set where the reference segments differ.
    pub fn cut_indicator(&self, edges: &[(NodeId, NodeId)]) -> Vec<bool> {
        edges.iter().map(|&(i, j)| self.segments[i] != self.segments[j]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn two_node(c_e: f64) -> CostGraph {
        CostGraph::new(2, 2, vec![(0, 1)], vec![0.0, 10.0, 0.0, 10.0], vec![c_e], &[0, 1]).unwrap()
    }

    #[test]
    fn minimal_instance_is_valid() {
        assert!(validate_graph(2, 1, &[(0, 1)], &[0.0, 0.0], &[1.0], &[]).is_ok());
    }

    #[test]
    fn each_violation_is_named() {
        let err = validate_graph(2, 1, &[(1, 1)], &[0.0, 0.0], &[1.0], &[]).unwrap_err();
        assert!(err.to_string().contains("self-loop"));

        let err = validate_graph(2, 1, &[(0, 1)], &[f64::NAN, 0.0], &[1.0], &[]).unwrap_err();
        assert!(err.to_string().contains("non-finite cost"));

        let err = validate_graph(2, 1, &[(0, 1), (0, 1)], &[0.0; 2], &[1.0, 1.0], &[]).unwrap_err();
        assert!(err.to_string().contains("duplicate edge"));

        let err = validate_graph(2, 1, &[(0, 5)], &[0.0; 2], &[1.0], &[]).unwrap_err();
        assert!(err.to_string().contains("index out of range"));

        let err = validate_graph(2, 1, &[(0, 1)], &[0.0; 2], &[f64::INFINITY], &[]).unwrap_err();
        assert!(err.to_string().contains("non-finite cost"));
    }

    #[test]
    fn report_lists_every_violation() {
        let err = validate_graph(3, 1, &[(1, 1), (0, 9)], &[0.0, f64::NAN, 0.0], &[1.0, 2.0], &[4])
            .unwrap_err();
        assert_eq!(err.violations.len(), 5, "{err}");
    }

    #[test]
    fn objective_examples() {
        let g = CostGraph::new(1, 2, vec![], vec![3.0, 7.0], vec![], &[]).unwrap();
        let lab = Labeling::from_clusters(&g, &[0], |_| 0);
        assert_eq!(objective(&g, &lab).unwrap(), 3.0);

        let g = CostGraph::new(2, 1, vec![(0, 1)], vec![0.0, 0.0], vec![5.0], &[0]).unwrap();
        let lab = Labeling::from_clusters(&g, &[0, 1], |_| 0);
        assert!(lab.cut[0]);
        assert_eq!(objective(&g, &lab).unwrap(), 5.0);

        let g = two_node(5.0);
        let lab = Labeling::from_clusters(&g, &[0, 0], |_| 1);
        assert_eq!(objective(&g, &lab).unwrap(), 20.0);
    }

    #[test]
    fn objective_rejects_infeasible() {
        let g = CostGraph::new(2, 2, vec![(0, 1)], vec![0.0; 4], vec![1.0], &[]).unwrap();
        // stuff class cut internally
        let lab = Labeling::from_clusters(&g, &[0, 1], |_| 0);
        let err = objective(&g, &lab).unwrap_err();
        assert!(err.to_string().contains("constraint violation"), "{err}");
        // different classes, edge not cut
        let mut lab = Labeling::from_clusters(&g, &[0, 0], |_| 0);
        lab.classes[1] = 1;
        assert_eq!(
            check_feasibility(&g, &lab),
            Err(Infeasibility::SegmentClassMismatch { node: 1 })
        );
    }

    #[test]
    fn disconnected_stuff_segments_must_share_an_id() {
        let g = CostGraph::new(3, 2, vec![(0, 1), (1, 2)], vec![0.0; 6], vec![0.0; 2], &[]).unwrap();
        let lab = Labeling::from_clusters(&g, &[0, 1, 2], |c| if c == 1 { 1 } else { 0 });
        assert_eq!(
            check_feasibility(&g, &lab),
            Err(Infeasibility::SplitNonPartitionable { class: 0 })
        );
        let lab = Labeling::from_clusters(&g, &[0, 1, 0], |c| if c == 1 { 1 } else { 0 });
        assert!(check_feasibility(&g, &lab).is_ok());
    }

    #[test]
    fn segments_are_dense_in_first_occurrence_order() {
        let g = CostGraph::new(4, 1, vec![], vec![0.0; 4], vec![], &[0]).unwrap();
        let lab = Labeling::from_clusters(&g, &[3, 1, 3, 0], |_| 0);
        assert_eq!(lab.segments, vec![0, 1, 0, 2]);
    }

    #[test]
    fn grid_examples() {
        assert_eq!(grid_graph(2, 2, &[1]).len(), 4);
        assert_eq!(grid_graph(1, 5, &[1, 4]), vec![(0, 1), (0, 4), (1, 2), (2, 3), (3, 4)]);
        assert!(grid_graph(1, 1, &[1]).is_empty());
    }

    #[test]
    fn ground_truth_derived_labels() {
        let gt = GroundTruth::new(vec![0, 0, 1], vec![2, 0], vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(gt.node_classes(), vec![2, 2, 0]);
        assert_eq!(gt.cut_indicator(&[(0, 1), (1, 2)]), vec![false, true]);
        assert!(GroundTruth::new(vec![0, 3], vec![0], vec![1.0]).is_err());
        assert!(GroundTruth::new(vec![0], vec![0], vec![0.0]).is_err());
    }
}
