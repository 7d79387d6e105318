//! Greedy additive edge contraction for asymmetric multiway cut.
//!
//! Every node starts as its own cluster labelled with its cheapest class.
//! The edge with the largest similarity `t = m - s` is contracted while
//! `t >= 0`, where `s` is the cost of the best joint class for both
//! clusters and `m` the cost of keeping them apart (edge cost plus both
//! current class costs). Contracting an edge lowers the objective by exactly
//! `t`. Finally all clusters sharing a non-partitionable class are merged.
//!
//! Ties: equal `t` pops the lexicographically smallest representative pair
//! first, class argmins prefer the smallest class id. The survivor of a
//! merge is always the smaller representative, so a cluster's representative
//! is its smallest node.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::graph::{ClassId, CostGraph, Labeling, NodeId};

/// One executed contraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub survivor: NodeId,
    pub absorbed: NodeId,
    pub similarity: f64,
    pub class: ClassId,
}

/// Record of a solve, for inspecting the descent.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    /// Objective of the singleton start: cheapest class per node, every edge cut.
    pub initial_objective: f64,
    pub merges: Vec<Merge>,
    /// Objective after the contraction loop, before stuff clusters are joined.
    pub contracted_objective: f64,
    /// Singleton start labels.
    pub initial_classes: Vec<ClassId>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    similarity: f64,
    a: usize,
    b: usize,
    class: ClassId,
    version_a: u32,
    version_b: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Max-heap: larger similarity first, then the smaller (a, b) pair.
    fn cmp(&self, other: &Self) -> Ordering {
        self.similarity
            .total_cmp(&other.similarity)
            .then_with(|| (other.a, other.b).cmp(&(self.a, self.b)))
            .then_with(|| (other.version_a, other.version_b).cmp(&(self.version_a, self.version_b)))
    }
}

/// Cluster bookkeeping for the contraction loop.
///
/// Stale heap entries are detected lazily through per-cluster version
/// counters: an entry is current iff both clusters are alive and neither
/// version moved since the entry was pushed.
#[derive(Debug, Clone)]
pub struct ContractionState<'g> {
    graph: &'g CostGraph,
    preferred: Option<&'g [ClassId]>,
    parent: Vec<usize>,
    costs: Vec<f64>,
    labels: Vec<ClassId>,
    versions: Vec<u32>,
    alive: Vec<bool>,
    adjacency: Vec<BTreeMap<usize, f64>>,
    queue: BinaryHeap<Candidate>,
}

impl<'g> ContractionState<'g> {
    /// Singleton clusters with accumulated edge costs. Parallel edges are
    /// impossible on a validated graph, so the adjacency maps start exact.
    pub fn new(graph: &'g CostGraph) -> Self {
        Self::build(graph, None)
    }

    fn build(graph: &'g CostGraph, preferred: Option<&'g [ClassId]>) -> Self {
        let n = graph.num_nodes();
        let mut state = Self {
            graph,
            preferred,
            parent: (0..n).collect(),
            costs: graph.node_costs().to_vec(),
            labels: vec![0; n],
            versions: vec![0; n],
            alive: vec![true; n],
            adjacency: vec![BTreeMap::new(); n],
            queue: BinaryHeap::with_capacity(graph.num_edges()),
        };
        for i in 0..n {
            state.labels[i] = state.argmin(state.cluster_costs(i), None, state.preference(i));
        }
        for (&(i, j), &c) in graph.edges().iter().zip(graph.edge_costs()) {
            state.adjacency[i].insert(j, c);
            state.adjacency[j].insert(i, c);
        }
        for &(i, j) in graph.edges() {
            state.push(i, j);
        }
        state
    }

    fn preference(&self, rep: usize) -> Option<ClassId> {
        self.preferred.map(|p| p[rep])
    }

    fn cluster_costs(&self, rep: usize) -> &[f64] {
        let k = self.graph.num_classes();
        &self.costs[rep * k..(rep + 1) * k]
    }

    /// Cheapest class of `a` (plus `b` if given). Ties go to `prefer` when it
    /// is among the minimisers, otherwise to the smallest id.
    fn argmin(&self, a: &[f64], b: Option<&[f64]>, prefer: Option<ClassId>) -> ClassId {
        let value = |k: usize| a[k] + b.map_or(0.0, |b| b[k]);
        let mut best = 0;
        let mut best_value = value(0);
        for k in 1..a.len() {
            let v = value(k);
            if v < best_value {
                best = k;
                best_value = v;
            }
        }
        match prefer {
            Some(p) if p != best && value(p) == best_value => p,
            _ => best,
        }
    }

    pub fn is_alive(&self, rep: usize) -> bool {
        self.alive[rep]
    }

    pub fn label(&self, rep: usize) -> ClassId {
        self.labels[rep]
    }

    /// Accumulated edge cost between two live clusters, if adjacent.
    pub fn edge_cost(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency.get(a)?.get(&b).copied()
    }

    /// Similarity `t` of contracting the edge between clusters `a` and `b`,
    /// with the joint class it would receive.
    pub fn edge_similarity(&self, a: usize, b: usize) -> Result<(f64, ClassId)> {
        let live = a != b
            && a < self.alive.len()
            && b < self.alive.len()
            && self.alive[a]
            && self.alive[b];
        let edge_cost = match self.edge_cost(a, b) {
            Some(c) if live => c,
            _ => return Err(Error::StaleEdge(a, b)),
        };
        let (ca, cb) = (self.cluster_costs(a), self.cluster_costs(b));
        let joint = self.argmin(ca, Some(cb), self.preference(a.min(b)));
        let merge_cost = ca[joint] + cb[joint];
        let separation_cost = edge_cost + ca[self.labels[a]] + cb[self.labels[b]];
        Ok((separation_cost - merge_cost, joint))
    }

    fn push(&mut self, a: usize, b: usize) {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        if let Ok((similarity, class)) = self.edge_similarity(a, b) {
            self.queue.push(Candidate {
                similarity,
                a,
                b,
                class,
                version_a: self.versions[a],
                version_b: self.versions[b],
            });
        }
    }

    fn is_current(&self, c: &Candidate) -> bool {
        self.alive[c.a]
            && self.alive[c.b]
            && self.versions[c.a] == c.version_a
            && self.versions[c.b] == c.version_b
    }

    /// Pops the best current candidate, discarding stale entries.
    fn pop_best(&mut self) -> Option<Candidate> {
        while let Some(c) = self.queue.pop() {
            if self.is_current(&c) {
                return Some(c);
            }
        }
        None
    }

    fn find(&mut self, mut i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[i] != root {
            let next = self.parent[i];
            self.parent[i] = root;
            i = next;
        }
        root
    }

    /// Contracts `absorbed` into `survivor` (`survivor < absorbed`).
    fn contract(&mut self, survivor: usize, absorbed: usize, class: ClassId) {
        debug_assert!(survivor < absorbed);
        let k = self.graph.num_classes();
        for c in 0..k {
            self.costs[survivor * k + c] += self.costs[absorbed * k + c];
        }
        self.labels[survivor] = class;
        self.alive[absorbed] = false;
        self.parent[absorbed] = survivor;
        self.versions[survivor] = self.versions[survivor].wrapping_add(1);

        let moved = core::mem::take(&mut self.adjacency[absorbed]);
        self.adjacency[survivor].remove(&absorbed);
        for (h, c) in moved {
            if h == survivor {
                continue;
            }
            self.adjacency[h].remove(&absorbed);
            *self.adjacency[h].entry(survivor).or_insert(0.0) += c;
            *self.adjacency[survivor].entry(h).or_insert(0.0) += c;
        }
        let neighbours: Vec<usize> = self.adjacency[survivor].keys().copied().collect();
        for h in neighbours {
            self.push(survivor, h);
        }
    }

    /// Runs the contraction loop until the best similarity is negative.
    fn contract_all(&mut self, merges: &mut Vec<Merge>) {
        while let Some(best) = self.pop_best() {
            if best.similarity < 0.0 {
                break;
            }
            self.contract(best.a, best.b, best.class);
            merges.push(Merge {
                survivor: best.a,
                absorbed: best.b,
                similarity: best.similarity,
                class: best.class,
            });
        }
    }

    /// Joins every pair of live clusters sharing a non-partitionable class.
    fn merge_non_partitionable(&mut self) {
        let mut first = vec![usize::MAX; self.graph.num_classes()];
        for rep in 0..self.alive.len() {
            if !self.alive[rep] {
                continue;
            }
            let k = self.labels[rep];
            if self.graph.is_partitionable(k) {
                continue;
            }
            if first[k] == usize::MAX {
                first[k] = rep;
            } else {
                self.alive[rep] = false;
                self.parent[rep] = first[k];
            }
        }
    }

    fn singleton_objective(&self) -> f64 {
        let mut total: f64 = self.graph.edge_costs().iter().sum();
        for i in 0..self.graph.num_nodes() {
            total += self.graph.node_cost(i, self.labels[i]);
        }
        total
    }

    fn into_labeling(mut self) -> Labeling {
        let n = self.graph.num_nodes();
        let cluster_of: Vec<usize> = (0..n).map(|i| self.find(i)).collect();
        let labels = self.labels;
        Labeling::from_clusters(self.graph, &cluster_of, |rep| labels[rep])
    }
}

fn run(g: &CostGraph, preferred: Option<&[ClassId]>) -> (Labeling, SolveTrace) {
    let mut state = ContractionState::build(g, preferred);
    let initial_classes = state.labels.clone();
    let initial_objective = state.singleton_objective();
    let mut merges = Vec::with_capacity(g.num_nodes());
    state.contract_all(&mut merges);
    let contracted_objective =
        merges.iter().fold(initial_objective, |acc, m| acc - m.similarity);
    state.merge_non_partitionable();
    let labeling = state.into_labeling();
    let trace = SolveTrace { initial_objective, merges, contracted_objective, initial_classes };
    (labeling, trace)
}

/// Heuristic AMWC solution of `g`.
pub fn solve(g: &CostGraph) -> Labeling {
    run(g, None).0
}

/// `solve` plus the merge sequence.
pub fn solve_traced(g: &CostGraph) -> (Labeling, SolveTrace) {
    run(g, None)
}

/// `solve` with class ties broken toward `preferred[rep]` for the cluster
/// represented by node `rep` (its smallest member). Costs are untouched, so
/// the result differs from `solve` only on exact ties.
pub fn solve_with_preference(g: &CostGraph, preferred: &[ClassId]) -> Result<Labeling> {
    if preferred.len() != g.num_nodes() {
        return Err(Error::Shape("preference vector length"));
    }
    if preferred.iter().any(|&k| k >= g.num_classes()) {
        return Err(Error::Shape("preferred class out of range"));
    }
    Ok(run(g, Some(preferred)).0)
}

/// Multiway cut: AMWC with no partitionable class, so every occupied class
/// forms exactly one segment.
pub fn solve_mwc(
    num_classes: usize,
    node_costs: Vec<f64>,
    edges: Vec<(NodeId, NodeId)>,
    edge_costs: Vec<f64>,
) -> Result<Labeling> {
    let num_nodes = node_costs.len() / num_classes.max(1);
    let g = CostGraph::new(num_nodes, num_classes, edges, node_costs, edge_costs, &[])?;
    Ok(solve(&g))
}
