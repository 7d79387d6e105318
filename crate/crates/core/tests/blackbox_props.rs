use amwc_core::blackbox::{
    backward_edge, backward_edge_robust, backward_node, backward_node_robust, backward_panoptic,
    backward_robust, backward_robust_lifted, PerturbConfig,
};
use amwc_core::graph::{CostGraph, GroundTruth};
use amwc_core::metrics::{pq_surrogate, pq_surrogate_grad, SegmentGradient};
use amwc_core::random::{random_graph, GraphSpec};
use amwc_core::seed;
use amwc_core::solver::solve;
use rand::Rng;

fn random_reference(seed: u64, g: &CostGraph) -> GroundTruth {
    let mut rng = seed::rng(seed, &[7]);
    let n = g.num_nodes();
    let j = rng.random_range(1..=n.min(4));
    let segments: Vec<usize> = (0..n).map(|i| if i < j { i } else { rng.random_range(0..j) }).collect();
    let classes = (0..j).map(|_| rng.random_range(0..g.num_classes())).collect();
    GroundTruth::new(segments, classes, vec![1.0; g.num_classes()]).unwrap()
}

#[test]
fn zero_loss_gradient_gives_zero_cost_gradient() {
    let spec = GraphSpec::new(30, 4);
    let multi = PerturbConfig { lambda_min: 0.5, lambda_max: 20.0, samples: 3, seed: 1 };
    for s in 0..100 {
        let g = random_graph(s, &spec);
        let fwd = solve(&g);
        let n = g.num_nodes();
        let dz = SegmentGradient::zeros(n, fwd.num_segments());
        let dx = vec![0.0; n * g.num_classes()];
        let dy = vec![0.0; g.num_edges()];
        assert!(backward_panoptic(&g, &fwd, &dz, 3.0).unwrap().is_zero(), "seed {s}");
        assert!(backward_robust(&g, &fwd, &dz, &multi).unwrap().is_zero(), "seed {s}");
        let extra: Vec<usize> = (0..g.num_classes()).collect();
        assert!(backward_robust_lifted(&g, &fwd, &dz, &multi, &extra).unwrap().is_zero(), "seed {s}");
        assert!(backward_node(&g, &fwd, &dx, 3.0).unwrap().is_zero());
        assert!(backward_node_robust(&g, &fwd, &dx, &multi).unwrap().is_zero());
        assert!(backward_edge(&g, &fwd, &dy, 3.0).unwrap().is_zero());
        assert!(backward_edge_robust(&g, &fwd, &dy, &multi).unwrap().is_zero());
    }
}

#[test]
fn entries_are_multiples_of_the_inverse_range() {
    let spec = GraphSpec::new(25, 3);
    for s in 0..60 {
        let g = random_graph(s, &spec);
        let gt = random_reference(s, &g);
        let fwd = solve(&g);
        let (_, m) = pq_surrogate((&fwd).into(), &gt).unwrap();
        let dz = pq_surrogate_grad((&fwd).into(), &gt, &m, 10.0).unwrap();
        let lambda = 0.7;
        let single = backward_panoptic(&g, &fwd, &dz, lambda).unwrap();
        for &v in single.node.iter().chain(&single.edge) {
            assert!(v == 0.0 || (v.abs() - 1.0 / lambda).abs() < 1e-12, "seed {s}: {v}");
        }
        let cfg = PerturbConfig { lambda_min: 0.5, lambda_max: 5.0, samples: 4, seed: s };
        let avg = backward_robust(&g, &fwd, &dz, &cfg).unwrap();
        assert!(avg.max_abs() <= 1.0 / cfg.lambda_min + 1e-12);
    }
}

/// Two nodes, one partitionable class: the edge is cut exactly when its
/// cost is negative. With loss `slope · y`, the estimator is nonzero only
/// for costs in `[-λ·slope, 0)`.
#[test]
fn interpolation_width_scales_with_lambda() {
    let slope = 1.5;
    let delta = 1e-3;
    for lambda in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let mut nonzero = 0usize;
        let steps = 20_000;
        for k in 0..=steps {
            let c = -10.0 + 20.0 * k as f64 / steps as f64;
            let g = CostGraph::new(2, 1, vec![(0, 1)], vec![0.0, 0.0], vec![c], &[0]).unwrap();
            let fwd = solve(&g);
            let grad = backward_edge(&g, &fwd, &[slope], lambda).unwrap();
            if grad.edge[0] != 0.0 {
                nonzero += 1;
            }
        }
        let width = nonzero as f64 * 20.0 / steps as f64;
        let predicted = lambda * slope;
        assert!((width - predicted).abs() <= 0.1 * predicted + delta, "λ = {lambda}: width {width}");
    }
}

#[test]
fn small_steps_rarely_increase_the_loss() {
    let spec = GraphSpec { max_nodes: 12, max_classes: 3, mean_degree: 3.0, cost_range: 2.0 };
    let w = 10.0;
    let lambda = 2.0;
    let rate = 0.5;
    let (mut trials, mut ok) = (0usize, 0usize);
    let mut s = 0;
    while trials < 100 {
        s += 1;
        let g = random_graph(s, &spec);
        let gt = random_reference(s, &g);
        let fwd = solve(&g);
        let (report, m) = pq_surrogate((&fwd).into(), &gt).unwrap();
        if report.value >= 1.0 {
            continue;
        }
        trials += 1;
        let dz = pq_surrogate_grad((&fwd).into(), &gt, &m, w).unwrap();
        let cfg = PerturbConfig { lambda_min: lambda, lambda_max: lambda, samples: 1, seed: s };
        let grad = backward_robust(&g, &fwd, &dz, &cfg).unwrap();
        let node: Vec<f64> = g.node_costs().iter().zip(&grad.node).map(|(c, d)| c - rate * d).collect();
        let stepped = g.with_costs(node, g.edge_costs().to_vec()).unwrap();
        let after = solve(&stepped);
        let (next, _) = pq_surrogate((&after).into(), &gt).unwrap();
        if w * (1.0 - next.value) <= w * (1.0 - report.value) + 1e-12 {
            ok += 1;
        }
    }
    assert!(ok >= 80, "{ok} of {trials} steps did not increase the loss");
}
