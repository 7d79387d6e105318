//! Seeded random instances for property checks and the gradient checker.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::{ClassId, CostGraph, GroundTruth, NodeId};
use crate::metrics::{match_soft_relaxed, MatchSet};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphSpec {
    pub max_nodes: usize,
    pub max_classes: usize,
    /// Expected number of neighbours per node.
    pub mean_degree: f64,
    /// Costs are uniform in `[-cost_range, cost_range]`.
    pub cost_range: f64,
}

impl GraphSpec {
    pub fn new(max_nodes: usize, max_classes: usize) -> Self {
        Self { max_nodes, max_classes, mean_degree: 4.0, cost_range: 5.0 }
    }
}

fn random_edges<R: Rng>(rng: &mut R, n: usize, mean_degree: f64) -> Vec<(NodeId, NodeId)> {
    let p = if n > 1 { (mean_degree / (n - 1) as f64).min(1.0) } else { 0.0 };
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Mixed-sign costs, random sparse topology, random partitionable subset.
pub fn random_graph(seed: u64, spec: &GraphSpec) -> CostGraph {
    let mut rng = seed::rng(seed, &[]);
    let n = rng.random_range(1..=spec.max_nodes.max(1));
    let k = rng.random_range(1..=spec.max_classes.max(1));
    let edges = random_edges(&mut rng, n, spec.mean_degree);
    let r = spec.cost_range;
    let node_costs = (0..n * k).map(|_| rng.random_range(-r..=r)).collect();
    let edge_costs = (0..edges.len()).map(|_| rng.random_range(-r..=r)).collect();
    let partitionable: Vec<ClassId> = (0..k).filter(|_| rng.random_bool(0.5)).collect();
    CostGraph::new(n, k, edges, node_costs, edge_costs, &partitionable).expect("generated graph is valid")
}

/// All edge costs positive and one class cheapest at every node.
pub fn attractive_graph(seed: u64, spec: &GraphSpec) -> CostGraph {
    let mut rng = seed::rng(seed, &[]);
    let n = rng.random_range(1..=spec.max_nodes.max(1));
    let k = rng.random_range(1..=spec.max_classes.max(1));
    let dominant = rng.random_range(0..k);
    let edges = random_edges(&mut rng, n, spec.mean_degree);
    let r = spec.cost_range;
    let mut node_costs = vec![0.0; n * k];
    for i in 0..n {
        let base = rng.random_range(-r..=r);
        for c in 0..k {
            node_costs[i * k + c] = if c == dominant { base } else { base + rng.random_range(0.1..=r) };
        }
    }
    let edge_costs = (0..edges.len()).map(|_| rng.random_range(0.1..=r)).collect();
    let partitionable: Vec<ClassId> = (0..k).filter(|_| rng.random_bool(0.5)).collect();
    CostGraph::new(n, k, edges, node_costs, edge_costs, &partitionable).expect("generated graph is valid")
}

/// Moves node `i` to `perm[i]`, keeping costs attached to their nodes.
pub fn permute_nodes(g: &CostGraph, perm: &[NodeId]) -> CostGraph {
    let (n, k) = (g.num_nodes(), g.num_classes());
    let mut node_costs = vec![0.0; n * k];
    for i in 0..n {
        node_costs[perm[i] * k..(perm[i] + 1) * k].copy_from_slice(g.node_row(i));
    }
    let mut edges: Vec<((NodeId, NodeId), f64)> = g
        .edges()
        .iter()
        .zip(g.edge_costs())
        .map(|(&(i, j), &c)| {
            let (a, b) = (perm[i], perm[j]);
            ((a.min(b), a.max(b)), c)
        })
        .collect();
    edges.sort_by_key(|e| e.0);
    let partitionable: Vec<ClassId> = g.partitionable_classes().collect();
    CostGraph::new(
        n,
        k,
        edges.iter().map(|e| e.0).collect(),
        node_costs,
        edges.iter().map(|e| e.1).collect(),
        &partitionable,
    )
    .expect("permuted graph is valid")
}

/// Uniform random permutation of `0..n`.
pub fn random_permutation(seed: u64, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(seed, &[]));
    perm
}

/// Relaxed memberships in `[0.1, 0.9]` with the soft matching they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedInstance {
    /// Row-major `nodes × pred_classes.len()`.
    pub memberships: Vec<f64>,
    pub pred_classes: Vec<ClassId>,
    pub ground_truth: GroundTruth,
    pub matches: MatchSet,
}

impl RelaxedInstance {
    pub fn num_pred(&self) -> usize {
        self.pred_classes.len()
    }
}

pub fn relaxed_instance(seed: u64, max_nodes: usize, max_classes: usize) -> RelaxedInstance {
    let mut rng = seed::rng(seed, &[]);
    let n = rng.random_range(2..=max_nodes.max(2));
    let k = rng.random_range(1..=max_classes.max(1));
    let num_gt = rng.random_range(1..=n.min(5));
    let gt_classes: Vec<ClassId> = (0..num_gt).map(|_| rng.random_range(0..k)).collect();
    let mut segments: Vec<usize> = (0..n).map(|i| if i < num_gt { i } else { rng.random_range(0..num_gt) }).collect();
    segments.shuffle(&mut rng);
    let thresholds = (0..k).map(|_| rng.random_range(0.5..=n as f64)).collect();
    let ground_truth = GroundTruth::new(segments, gt_classes, thresholds).expect("generated reference is valid");

    let num_pred = rng.random_range(1..=5);
    let pred_classes: Vec<ClassId> = (0..num_pred).map(|_| rng.random_range(0..k)).collect();
    let memberships: Vec<f64> = (0..n * num_pred).map(|_| rng.random_range(0.1..=0.9)).collect();
    let matches = match_soft_relaxed(&memberships, &pred_classes, &ground_truth).expect("shapes agree");
    RelaxedInstance { memberships, pred_classes, ground_truth, matches }
}
