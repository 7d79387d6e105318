//! Training a linear cost model through the solver.

mod model;
mod task;

pub use model::LinearCostModel;
pub use task::{gen_task, SyntheticTask, TaskSpec};

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::index;

use crate::blackbox::{
    backward_edge_robust, backward_node_robust, backward_robust_lifted, edge_loss, node_loss,
    unmatched_ground_truth_classes, CostGradient, PerturbConfig,
};
use crate::error::{Error, Result};
use crate::metrics::{pq_exact, pq_surrogate, pq_surrogate_grad};
use crate::solver::solve;
use crate::{par, seed};

/// Which loss drives the backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `w · (1 - PQ̄)` through the lifted panoptic backward pass.
    Surrogate,
    /// `w · L_V` on class labels.
    Node,
    /// `w · L_E` on cut indicators.
    Edge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Self::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Kept entries of each cost tensor after dropout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DropoutMask {
    pub node: Vec<bool>,
    pub edge: Vec<bool>,
}

fn drop_entries(values: &mut [f64], rate: f64, seed: u64, stream: u64) -> Vec<bool> {
    let mut kept = vec![true; values.len()];
    let amount = libm::floor(rate * values.len() as f64) as usize;
    let mut rng = seed::rng(seed, &[stream]);
    for i in index::sample(&mut rng, values.len(), amount.min(values.len())) {
        values[i] = 0.0;
        kept[i] = false;
    }
    kept
}

/// Zeroes exactly `⌊rate·len⌋` entries of each tensor, positions drawn
/// without replacement from `seed`. Survivors are not rescaled.
pub fn cost_dropout(node: &[f64], edge: &[f64], rate: f64, seed: u64) -> Result<(Vec<f64>, Vec<f64>, DropoutMask)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidConfig("dropout rate must lie in [0, 1)"));
    }
    let (mut n, mut e) = (node.to_vec(), edge.to_vec());
    let mask = DropoutMask { node: drop_entries(&mut n, rate, seed, 0), edge: drop_entries(&mut e, rate, seed, 1) };
    Ok((n, e, mask))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// λ interval and sample count; the seed field is ignored, each
    /// iteration and batch slot derives its own from `seed`.
    pub perturb: PerturbConfig,
    pub loss_scale: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub seed: u64,
    pub loss: LossKind,
    pub optimizer: Optimizer,
    /// Append classes of unmatched ground-truth segments to the lifted
    /// class set of the surrogate backward pass.
    pub lift_ground_truth: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            perturb: PerturbConfig { lambda_min: 1.0, lambda_max: 50.0, samples: 5, seed: 0 },
            loss_scale: 10.0,
            learning_rate: 1e-3,
            iterations: 200,
            batch_size: 8,
            dropout: 0.1,
            seed: 0,
            loss: LossKind::Surrogate,
            optimizer: Optimizer::Sgd,
            lift_ground_truth: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.perturb.validate()?;
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be finite and non-negative"));
        }
        if !(self.loss_scale.is_finite()) {
            return Err(Error::InvalidConfig("loss scale must be finite"));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig("dropout rate must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    /// Mean batch loss (scaled by `w`).
    pub loss: f64,
    /// Mean exact PQ of the batch forward passes.
    pub pq_train: f64,
    /// Mean exact PQ on the evaluation set after the update; NaN without one.
    pub pq_eval: f64,
}

impl fmt::Display for IterationLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "iter={} loss={:?} pq_train={:?} pq_eval={:?}", self.iteration, self.loss, self.pq_train, self.pq_eval)
    }
}

/// Mean exact PQ of `model` on `tasks`, no dropout.
pub fn evaluate(tasks: &[SyntheticTask], model: &LinearCostModel) -> Result<f64> {
    if tasks.is_empty() {
        return Ok(f64::NAN);
    }
    let scores = par::map_indexed(tasks.len(), |t| -> Result<f64> {
        let g = model.costs(&tasks[t])?;
        let lab = solve(&g);
        Ok(pq_exact((&lab).into(), &tasks[t].ground_truth)?.pq)
    });
    let mut sum = 0.0;
    for s in scores {
        sum += s?;
    }
    Ok(sum / tasks.len() as f64)
}

struct Step {
    loss: f64,
    pq: f64,
    grad: Vec<f64>,
}

fn task_step(task: &SyntheticTask, model: &LinearCostModel, cfg: &TrainConfig, step_seed: u64) -> Result<Step> {
    let (node, edge, mask) = cost_dropout(
        &model.node_costs(task)?,
        &model.edge_costs(task)?,
        cfg.dropout,
        seed::derive(step_seed, &[0]),
    )?;
    let g = task.skeleton.with_costs(node, edge)?;
    let fwd = solve(&g);
    let gt = &task.ground_truth;
    let pq = pq_exact((&fwd).into(), gt)?.pq;
    let perturb = PerturbConfig { seed: seed::derive(step_seed, &[1]), ..cfg.perturb };
    let w = cfg.loss_scale;

    let (loss, mut cost_grad) = match cfg.loss {
        LossKind::Surrogate => {
            let (report, matches) = pq_surrogate((&fwd).into(), gt)?;
            let dz = pq_surrogate_grad((&fwd).into(), gt, &matches, w)?;
            let extra = if cfg.lift_ground_truth { unmatched_ground_truth_classes(&matches, gt) } else { Vec::new() };
            (w * (1.0 - report.value), backward_robust_lifted(&g, &fwd, &dz, &perturb, &extra)?)
        }
        LossKind::Node => {
            let (v, mut dx) = node_loss(&fwd.classes, &gt.node_classes(), g.num_classes())?;
            dx.iter_mut().for_each(|d| *d *= w);
            (w * v, backward_node_robust(&g, &fwd, &dx, &perturb)?)
        }
        LossKind::Edge => {
            let (v, mut dy) = edge_loss(&fwd.cut, &gt.cut_indicator(g.edges()))?;
            dy.iter_mut().for_each(|d| *d *= w);
            (w * v, backward_edge_robust(&g, &fwd, &dy, &perturb)?)
        }
    };
    apply_mask(&mut cost_grad, &mask);
    Ok(Step { loss, pq, grad: model.backprop(task, &cost_grad)? })
}

fn apply_mask(grad: &mut CostGradient, mask: &DropoutMask) {
    for (g, &keep) in grad.node.iter_mut().zip(&mask.node).chain(grad.edge.iter_mut().zip(&mask.edge)) {
        if !keep {
            *g = 0.0;
        }
    }
}

fn batch_indices(num_tasks: usize, batch: usize, seed: u64, iteration: usize) -> Vec<usize> {
    if batch >= num_tasks {
        return (0..num_tasks).collect();
    }
    let mut rng = seed::rng(seed, &[0, iteration as u64]);
    let mut picked = index::sample(&mut rng, num_tasks, batch).into_vec();
    picked.sort_unstable();
    picked
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Gradient descent through the solver. Returns the trained model and one
/// log entry per iteration.
pub fn train(
    tasks: &[SyntheticTask],
    eval_tasks: &[SyntheticTask],
    model: &LinearCostModel,
    cfg: &TrainConfig,
) -> Result<(LinearCostModel, Vec<IterationLog>)> {
    cfg.validate()?;
    if tasks.is_empty() {
        return Err(Error::InvalidConfig("no training tasks"));
    }
    let mut model = model.clone();
    let mut params = model.parameters();
    let mut adam = AdamState { m: vec![0.0; params.len()], v: vec![0.0; params.len()], t: 0 };
    let mut log = Vec::with_capacity(cfg.iterations);

    for iteration in 0..cfg.iterations {
        let batch = batch_indices(tasks.len(), cfg.batch_size, cfg.seed, iteration);
        let steps = par::map_indexed(batch.len(), |slot| {
            let step_seed = seed::derive(cfg.seed, &[1, iteration as u64, slot as u64]);
            task_step(&tasks[batch[slot]], &model, cfg, step_seed)
        });
        let mut grad = vec![0.0; params.len()];
        let (mut loss, mut pq) = (0.0, 0.0);
        for step in steps {
            let step = step?;
            loss += step.loss;
            pq += step.pq;
            grad.iter_mut().zip(&step.grad).for_each(|(a, b)| *a += b);
        }
        let scale = 1.0 / batch.len() as f64;
        loss *= scale;
        pq *= scale;
        grad.iter_mut().for_each(|g| *g *= scale);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration });
        }

        match cfg.optimizer {
            Optimizer::Sgd => {
                params.iter_mut().zip(&grad).for_each(|(p, g)| *p -= cfg.learning_rate * g);
            }
            Optimizer::Adam { beta1, beta2, epsilon } => {
                adam.t += 1;
                let c1 = 1.0 - libm::pow(beta1, f64::from(adam.t));
                let c2 = 1.0 - libm::pow(beta2, f64::from(adam.t));
                for (i, p) in params.iter_mut().enumerate() {
                    adam.m[i] = beta1 * adam.m[i] + (1.0 - beta1) * grad[i];
                    adam.v[i] = beta2 * adam.v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    *p -= cfg.learning_rate * (adam.m[i] / c1) / (libm::sqrt(adam.v[i] / c2) + epsilon);
                }
            }
        }
        model.set_parameters(&params)?;
        if !model.is_finite() {
            return Err(Error::NonFiniteLoss { iteration });
        }

        let pq_eval = evaluate(eval_tasks, &model)?;
        log.push(IterationLog { iteration, loss, pq_train: pq, pq_eval });
    }
    Ok((model, log))
}

/// Mean per-node cross-entropy of `softmax(-c_V)` against reference classes,
/// with its gradient in parameter layout.
pub fn cross_entropy(tasks: &[SyntheticTask], model: &LinearCostModel) -> Result<(f64, Vec<f64>)> {
    let k = model.num_classes;
    let mut total = 0.0;
    let mut count = 0usize;
    let mut grad = vec![0.0; model.num_parameters()];
    for task in tasks {
        let costs = model.node_costs(task)?;
        let gt = task.ground_truth.node_classes();
        let mut dc = vec![0.0; costs.len()];
        for (i, row) in costs.chunks(k).enumerate() {
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
            let z: f64 = row.iter().map(|&c| libm::exp(lo - c)).sum();
            // -log p(gt) = c_gt - lo + log z
            total += row[gt[i]] - lo + libm::log(z);
            for (c, &v) in row.iter().enumerate() {
                let p = libm::exp(lo - v) / z;
                dc[i * k + c] = f64::from(u8::from(c == gt[i])) - p;
            }
        }
        count += costs.len() / k.max(1);
        let part = model.backprop(task, &CostGradient { node: dc, edge: vec![0.0; task.num_edges()] })?;
        grad.iter_mut().zip(&part).for_each(|(a, b)| *a += b);
    }
    if count == 0 {
        return Ok((0.0, grad));
    }
    let n = count as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((total / n, grad))
}

/// Full-batch gradient descent on `cross_entropy`. Edge parameters are
/// untouched.
pub fn pretrain_cross_entropy(
    tasks: &[SyntheticTask],
    model: &LinearCostModel,
    iterations: usize,
    learning_rate: f64,
) -> Result<LinearCostModel> {
    let mut model = model.clone();
    let mut params = model.parameters();
    for iteration in 0..iterations {
        let (loss, grad) = cross_entropy(tasks, &model)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration });
        }
        params.iter_mut().zip(&grad).for_each(|(p, g)| *p -= learning_rate * g);
        model.set_parameters(&params)?;
    }
    Ok(model)
}
