//! Invariant checks of solver, metrics and gradients on seeded random
//! instances.

use std::fmt;

use amwc_core::blackbox::{
    backward_edge, backward_node, backward_panoptic, backward_robust, backward_robust_lifted, PerturbConfig,
};
use amwc_core::graph::{check_feasibility, CostGraph, GroundTruth};
use amwc_core::metrics::{
    pq_exact, pq_surrogate, pq_surrogate_grad, pq_surrogate_grad_relaxed, pq_surrogate_grad_relaxed_sign_flipped,
    pq_surrogate_relaxed,
};
use amwc_core::oracle::{brute_force, MAX_CLASSES, MAX_NODES};
use amwc_core::random::{attractive_graph, random_graph, relaxed_instance, GraphSpec};
use amwc_core::seed::{derive, rng};
use amwc_core::solver::solve;
use amwc_core::{Error, Result};
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckOptions {
    pub seed: u64,
    pub instances: usize,
    pub max_nodes: usize,
    pub max_classes: usize,
    pub oracle_nodes: usize,
    pub oracle_classes: usize,
    pub perturb: PerturbConfig,
    pub inject_sign_flip: bool,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 50,
            max_nodes: 25,
            max_classes: 3,
            oracle_nodes: 7,
            oracle_classes: 3,
            perturb: PerturbConfig { lambda_min: 1.0, lambda_max: 50.0, samples: 5, seed: 0 },
            inject_sign_flip: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_error: f64,
    pub tolerance: f64,
    pub failure: &'static str,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "ok" } else { "FAIL" };
        write!(f, "check={} max_error={:e} tolerance={:e} status={status}", self.name, self.max_error, self.tolerance)
    }
}

/// Random reference labeling on the nodes of `g`, unit area thresholds.
pub fn random_reference(seed: u64, g: &CostGraph) -> GroundTruth {
    let mut r = rng(seed, &[7]);
    let n = g.num_nodes();
    let j = r.random_range(1..=n.min(4));
    let segments: Vec<usize> = (0..n).map(|i| if i < j { i } else { r.random_range(0..j) }).collect();
    let classes = (0..j).map(|_| r.random_range(0..g.num_classes())).collect();
    GroundTruth::new(segments, classes, vec![1.0; g.num_classes()]).expect("generated reference is valid")
}

/// Largest relative error between the analytic surrogate gradient and
/// central differences over all memberships of one relaxed instance.
pub fn fd_error(seed: u64, max_nodes: usize, max_classes: usize, sign_flip: bool) -> Result<f64> {
    let inst = relaxed_instance(seed, max_nodes, max_classes);
    let k = inst.num_pred();
    let w = 10.0;
    let grad = if sign_flip {
        pq_surrogate_grad_relaxed_sign_flipped(&inst.memberships, k, &inst.ground_truth, &inst.matches, w)?
    } else {
        pq_surrogate_grad_relaxed(&inst.memberships, k, &inst.ground_truth, &inst.matches, w)?
    };
    let loss = |p: &[f64]| -> Result<f64> {
        Ok(w * (1.0 - pq_surrogate_relaxed(p, k, &inst.ground_truth, &inst.matches)?))
    };
    let mut p = inst.memberships.clone();
    let mut worst = 0.0f64;
    for idx in 0..p.len() {
        let orig = p[idx];
        p[idx] = orig + FD_STEP;
        let up = loss(&p)?;
        p[idx] = orig - FD_STEP;
        let down = loss(&p)?;
        p[idx] = orig;
        let fd = (up - down) / (2.0 * FD_STEP);
        let an = grad.values()[idx];
        worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6));
    }
    Ok(worst)
}

/// Runs every check. Fails only on malformed options.
pub fn run_checks(opts: &GradcheckOptions) -> Result<Vec<CheckResult>> {
    if opts.oracle_nodes > MAX_NODES || opts.oracle_classes > MAX_CLASSES {
        return Err(Error::OracleSizeLimit {
            nodes: opts.oracle_nodes,
            classes: opts.oracle_classes,
            max_nodes: MAX_NODES,
            max_classes: MAX_CLASSES,
        });
    }
    opts.perturb.validate()?;
    let s = |check: u64, i: usize| derive(opts.seed, &[check, i as u64]);
    let spec = GraphSpec::new(opts.max_nodes, opts.max_classes);
    let mut out = Vec::new();

    let mut fd = 0.0f64;
    for i in 0..opts.instances {
        fd = fd.max(fd_error(s(0, i), opts.max_nodes, opts.max_classes, opts.inject_sign_flip)?);
    }
    out.push(CheckResult { name: "fd-gradient", max_error: fd, tolerance: FD_TOLERANCE, failure: "fd-gradient mismatch" });

    let mut infeasible = 0.0;
    for i in 0..opts.instances {
        let g = random_graph(s(1, i), &spec);
        if check_feasibility(&g, &solve(&g)).is_err() {
            infeasible += 1.0;
        }
    }
    out.push(CheckResult {
        name: "solver-feasibility",
        max_error: infeasible,
        tolerance: 0.0,
        failure: "solver-feasibility violation",
    });

    let small = GraphSpec::new(opts.oracle_nodes, opts.oracle_classes);
    let (mut gap, mut attractive_gap) = (0.0f64, 0.0f64);
    for i in 0..opts.instances {
        let g = random_graph(s(2, i), &small);
        gap = gap.max(brute_force(&g)?.objective - solve(&g).objective);
        let g = attractive_graph(s(3, i), &small);
        attractive_gap = attractive_gap.max((brute_force(&g)?.objective - solve(&g).objective).abs());
    }
    out.push(CheckResult { name: "oracle-bound", max_error: gap.max(0.0), tolerance: EPS, failure: "oracle-bound violation" });
    out.push(CheckResult {
        name: "oracle-attractive",
        max_error: attractive_gap,
        tolerance: EPS,
        failure: "oracle-attractive mismatch",
    });

    let (mut zero, mut entries, mut bounds) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..opts.instances {
        let g = random_graph(s(4, i), &spec);
        let fwd = solve(&g);
        let n = g.num_nodes();
        let gt = random_reference(s(5, i), &g);
        let cfg = PerturbConfig { seed: s(6, i), ..opts.perturb };

        let dz = amwc_core::SegmentGradient::zeros(n, fwd.num_segments());
        let all: Vec<usize> = (0..g.num_classes()).collect();
        for grad in [
            backward_panoptic(&g, &fwd, &dz, cfg.lambda_min)?,
            backward_robust(&g, &fwd, &dz, &cfg)?,
            backward_robust_lifted(&g, &fwd, &dz, &cfg, &all)?,
            backward_node(&g, &fwd, &vec![0.0; n * g.num_classes()], cfg.lambda_min)?,
            backward_edge(&g, &fwd, &vec![0.0; g.num_edges()], cfg.lambda_min)?,
        ] {
            zero = zero.max(grad.max_abs());
        }

        let (report, m) = pq_surrogate((&fwd).into(), &gt)?;
        let exact = pq_exact((&fwd).into(), &gt)?.pq;
        for v in [report.value, exact] {
            bounds = bounds.max(-v).max(v - 1.0);
        }
        let dz = pq_surrogate_grad((&fwd).into(), &gt, &m, 10.0)?;
        let lambda = cfg.lambda(0);
        let grad = backward_panoptic(&g, &fwd, &dz, lambda)?;
        for &v in grad.node.iter().chain(&grad.edge) {
            if v != 0.0 {
                entries = entries.max((v.abs() - 1.0 / lambda).abs() * lambda);
            }
        }
    }
    out.push(CheckResult { name: "zero-gradient", max_error: zero, tolerance: 0.0, failure: "zero-gradient violation" });
    out.push(CheckResult {
        name: "gradient-entries",
        max_error: entries,
        tolerance: EPS,
        failure: "gradient-entries mismatch",
    });
    out.push(CheckResult {
        name: "metric-bounds",
        max_error: bounds.max(0.0),
        tolerance: EPS,
        failure: "metric-bounds violation",
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> GradcheckOptions {
        GradcheckOptions { instances: 8, max_nodes: 12, ..GradcheckOptions::default() }
    }

    #[test]
    fn default_checks_pass() {
        let results = run_checks(&quick()).unwrap();
        assert!(results.iter().all(CheckResult::passed), "{results:?}");
    }

    #[test]
    fn sign_flip_is_caught() {
        let results = run_checks(&GradcheckOptions { inject_sign_flip: true, ..quick() }).unwrap();
        let failed: Vec<_> = results.iter().filter(|r| !r.passed()).map(|r| r.failure).collect();
        assert_eq!(failed, ["fd-gradient mismatch"]);
    }

    #[test]
    fn oversized_oracle_is_rejected() {
        let e = run_checks(&GradcheckOptions { oracle_nodes: MAX_NODES + 1, ..quick() }).unwrap_err();
        assert!(e.to_string().contains("oracle size limit"));
    }
}
