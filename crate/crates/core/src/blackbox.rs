//! Gradients through the solver by cost perturbation.
//!
//! For a solver `W(c) = argmin ⟨c, x⟩` and a loss gradient `∇L` at `W(c)`,
//! the interpolated gradient is `(W(c + λ∇L) - W(c)) / λ`. The multi-scale
//! variant averages it over `λ` drawn uniformly from an interval.
//!
//! Panoptic losses act on segments, not classes, so the backward pass lifts
//! the problem to a multiway cut with one class per forward segment (plus
//! one per base class left unused): the lifted node cost of segment `l` is
//! `c_V(i, m(l)) + λ ∂L/∂z(i, l)` and edge costs are left untouched. Class ties in the lifted solve are broken toward
//! the forward segment of each cluster, so a zero loss gradient reproduces
//! the forward solution exactly.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{ClassId, CostGraph, GroundTruth, Labeling};
use crate::metrics::{MatchSet, SegmentGradient};
use crate::solver::{solve, solve_with_preference};
use crate::{par, seed};

/// Gradient of a loss with respect to node costs (`nodes × classes`,
/// row-major) and edge costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGradient {
    pub node: Vec<f64>,
    pub edge: Vec<f64>,
}

impl CostGradient {
    pub fn zeros(g: &CostGraph) -> Self {
        Self { node: vec![0.0; g.node_costs().len()], edge: vec![0.0; g.num_edges()] }
    }

    pub fn is_zero(&self) -> bool {
        self.node.iter().chain(&self.edge).all(|&v| v == 0.0)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.node.iter().chain(&self.edge).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(onehot(x_p) - onehot(x)) / λ` and `(y_p - y) / λ`.
    fn from_difference(g: &CostGraph, fwd: &Labeling, classes: &[ClassId], cut: &[bool], lambda: f64) -> Self {
        let k = g.num_classes();
        let mut grad = Self::zeros(g);
        let step = 1.0 / lambda;
        for (i, (&after, &before)) in classes.iter().zip(&fwd.classes).enumerate() {
            if after != before {
                grad.node[i * k + after] += step;
                grad.node[i * k + before] -= step;
            }
        }
        for (e, (&after, &before)) in cut.iter().zip(&fwd.cut).enumerate() {
            if after != before {
                grad.edge[e] = if after { step } else { -step };
            }
        }
        grad
    }

    fn mean(parts: &[Self]) -> Self {
        let mut acc = Self { node: vec![0.0; parts[0].node.len()], edge: vec![0.0; parts[0].edge.len()] };
        for p in parts {
            acc.node.iter_mut().zip(&p.node).for_each(|(a, b)| *a += b);
            acc.edge.iter_mut().zip(&p.edge).for_each(|(a, b)| *a += b);
        }
        let n = parts.len() as f64;
        acc.node.iter_mut().chain(acc.edge.iter_mut()).for_each(|v| *v /= n);
        acc
    }
}

/// Interval and sample count of the multi-scale estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub samples: usize,
    pub seed: u64,
}

impl PerturbConfig {
    pub fn single(lambda: f64) -> Self {
        Self { lambda_min: lambda, lambda_max: lambda, samples: 1, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda_min)?;
        check_lambda(self.lambda_max)?;
        if self.lambda_min > self.lambda_max {
            return Err(Error::InvalidConfig("lambda_min exceeds lambda_max"));
        }
        if self.samples == 0 {
            return Err(Error::InvalidConfig("sample count must be positive"));
        }
        Ok(())
    }

    /// The `index`-th interpolation range; depends only on `(seed, index)`.
    pub fn lambda(&self, index: usize) -> f64 {
        if self.lambda_min == self.lambda_max {
            return self.lambda_min;
        }
        let u: f64 = seed::rng(self.seed, &[index as u64]).random();
        self.lambda_min + (self.lambda_max - self.lambda_min) * u
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidLambda(lambda))
    }
}

/// Classes of ground-truth segments left unmatched, for use as extra lifted
/// classes in `backward_panoptic_lifted`.
pub fn unmatched_ground_truth_classes(matches: &MatchSet, gt: &GroundTruth) -> Vec<ClassId> {
    matches
        .classes
        .iter()
        .flat_map(|c| c.false_negatives.iter().map(|&s| gt.segment_classes()[s]))
        .collect()
}

/// Single-range backward pass through the lifted multiway cut. Lifted
/// classes are the forward segments followed by one unperturbed class for
/// every base class no forward segment carries, so intermediate clusters can
/// hold any base class, as in the forward solve.
pub fn backward_panoptic(g: &CostGraph, fwd: &Labeling, dz: &SegmentGradient, lambda: f64) -> Result<CostGradient> {
    backward_panoptic_lifted(g, fwd, dz, lambda, &[])
}

/// As `backward_panoptic`, with `extra_classes` appended as further lifted
/// classes with zero loss gradient.
pub fn backward_panoptic_lifted(
    g: &CostGraph,
    fwd: &Labeling,
    dz: &SegmentGradient,
    lambda: f64,
    extra_classes: &[ClassId],
) -> Result<CostGradient> {
    check_lambda(lambda)?;
    let n = g.num_nodes();
    let forward_segments = fwd.num_segments();
    if dz.num_nodes() != n || dz.num_segments() != forward_segments {
        return Err(Error::Shape("segment gradient does not match the forward labeling"));
    }
    if fwd.segments.len() != n {
        return Err(Error::Shape("forward labeling node count"));
    }
    if extra_classes.iter().any(|&k| k >= g.num_classes()) {
        return Err(Error::Shape("extra lifted class out of range"));
    }
    let unused = (0..g.num_classes()).filter(|k| !fwd.segment_classes.contains(k));
    let lifted_to_class: Vec<ClassId> =
        fwd.segment_classes.iter().copied().chain(unused).chain(extra_classes.iter().copied()).collect();
    let lifted = lifted_to_class.len();

    let mut costs = Vec::with_capacity(n * lifted);
    for i in 0..n {
        for (l, &k) in lifted_to_class.iter().enumerate() {
            let perturbation = if l < forward_segments { lambda * dz.get(i, l) } else { 0.0 };
            costs.push(g.node_cost(i, k) + perturbation);
        }
    }
    let lifted_graph = CostGraph::new(n, lifted, g.edges().to_vec(), costs, g.edge_costs().to_vec(), &[])?;
    let perturbed = solve_with_preference(&lifted_graph, &fwd.segments)?;
    let classes: Vec<ClassId> = perturbed.classes.iter().map(|&l| lifted_to_class[l]).collect();
    Ok(CostGradient::from_difference(g, fwd, &classes, &perturbed.cut, lambda))
}

/// Multi-scale estimator: mean of `backward_panoptic` over the sampled ranges.
pub fn backward_robust(g: &CostGraph, fwd: &Labeling, dz: &SegmentGradient, cfg: &PerturbConfig) -> Result<CostGradient> {
    backward_robust_lifted(g, fwd, dz, cfg, &[])
}

pub fn backward_robust_lifted(
    g: &CostGraph,
    fwd: &Labeling,
    dz: &SegmentGradient,
    cfg: &PerturbConfig,
    extra_classes: &[ClassId],
) -> Result<CostGradient> {
    cfg.validate()?;
    let parts = par::map_indexed(cfg.samples, |s| {
        backward_panoptic_lifted(g, fwd, dz, cfg.lambda(s), extra_classes)
    });
    let parts: Vec<CostGradient> = parts.into_iter().collect::<Result<_>>()?;
    Ok(CostGradient::mean(&parts))
}

/// Backward pass for a loss on class labels: `dx` is `∂L/∂x` on the one-hot
/// relaxation (`nodes × classes`). Node costs are perturbed and the same
/// AMWC solver is called again.
pub fn backward_node(g: &CostGraph, fwd: &Labeling, dx: &[f64], lambda: f64) -> Result<CostGradient> {
    check_lambda(lambda)?;
    if dx.len() != g.node_costs().len() {
        return Err(Error::Shape("class gradient shape"));
    }
    let costs = g.node_costs().iter().zip(dx).map(|(c, d)| c + lambda * d).collect();
    let perturbed = solve(&g.with_costs(costs, g.edge_costs().to_vec())?);
    Ok(CostGradient::from_difference(g, fwd, &perturbed.classes, &perturbed.cut, lambda))
}

/// Backward pass for a loss on cut indicators; perturbs edge costs only.
pub fn backward_edge(g: &CostGraph, fwd: &Labeling, dy: &[f64], lambda: f64) -> Result<CostGradient> {
    check_lambda(lambda)?;
    if dy.len() != g.num_edges() {
        return Err(Error::Shape("cut gradient shape"));
    }
    let costs = g.edge_costs().iter().zip(dy).map(|(c, d)| c + lambda * d).collect();
    let perturbed = solve(&g.with_costs(g.node_costs().to_vec(), costs)?);
    Ok(CostGradient::from_difference(g, fwd, &perturbed.classes, &perturbed.cut, lambda))
}

/// `L_V = ‖x - x_g‖₁ / |V|` on one-hot class indicators, with its gradient.
/// On `[0, 1]` each term is linear, so the gradient is `(1 - 2 x_g) / |V|`.
pub fn node_loss(classes: &[ClassId], gt_classes: &[ClassId], num_classes: usize) -> Result<(f64, Vec<f64>)> {
    if classes.len() != gt_classes.len() || classes.is_empty() {
        return Err(Error::Shape("class label vectors differ in length"));
    }
    let n = classes.len() as f64;
    let wrong = classes.iter().zip(gt_classes).filter(|(a, b)| a != b).count();
    let value = 2.0 * wrong as f64 / n;
    let mut grad = vec![1.0 / n; classes.len() * num_classes];
    for (i, &k) in gt_classes.iter().enumerate() {
        grad[i * num_classes + k] = -1.0 / n;
    }
    Ok((value, grad))
}

/// `L_E = 1 - F1(y, y_g)` on cut indicators, with its gradient. Simplifies
/// to `1 - 2 yᵀy_g / (|y| + |y_g|)`; defined as 0 when neither side cuts.
pub fn edge_loss(cut: &[bool], gt_cut: &[bool]) -> Result<(f64, Vec<f64>)> {
    if cut.len() != gt_cut.len() {
        return Err(Error::Shape("cut vectors differ in length"));
    }
    let agree = cut.iter().zip(gt_cut).filter(|(&a, &b)| a && b).count() as f64;
    let total = (cut.iter().filter(|&&c| c).count() + gt_cut.iter().filter(|&&c| c).count()) as f64;
    if total == 0.0 {
        return Ok((0.0, vec![0.0; cut.len()]));
    }
    let value = 1.0 - 2.0 * agree / total;
    let grad = gt_cut
        .iter()
        .map(|&g| -(2.0 * f64::from(u8::from(g)) * total - 2.0 * agree) / (total * total))
        .collect();
    Ok((value, grad))
}

pub fn backward_node_loss(g: &CostGraph, fwd: &Labeling, gt_classes: &[ClassId], lambda: f64) -> Result<CostGradient> {
    let (_, dx) = node_loss(&fwd.classes, gt_classes, g.num_classes())?;
    backward_node(g, fwd, &dx, lambda)
}

pub fn backward_edge_loss(g: &CostGraph, fwd: &Labeling, gt_cut: &[bool], lambda: f64) -> Result<CostGradient> {
    let (_, dy) = edge_loss(&fwd.cut, gt_cut)?;
    backward_edge(g, fwd, &dy, lambda)
}

/// Multi-scale versions of the label-loss backward passes.
pub fn backward_node_robust(g: &CostGraph, fwd: &Labeling, dx: &[f64], cfg: &PerturbConfig) -> Result<CostGradient> {
    cfg.validate()?;
    let parts = par::map_indexed(cfg.samples, |s| backward_node(g, fwd, dx, cfg.lambda(s)));
    let parts: Vec<CostGradient> = parts.into_iter().collect::<Result<_>>()?;
    Ok(CostGradient::mean(&parts))
}

pub fn backward_edge_robust(g: &CostGraph, fwd: &Labeling, dy: &[f64], cfg: &PerturbConfig) -> Result<CostGradient> {
    cfg.validate()?;
    let parts = par::map_indexed(cfg.samples, |s| backward_edge(g, fwd, dy, cfg.lambda(s)));
    let parts: Vec<CostGradient> = parts.into_iter().collect::<Result<_>>()?;
    Ok(CostGradient::mean(&parts))
}
