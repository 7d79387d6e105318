use amwc_core::blackbox::backward_edge;
use amwc_core::graph::{CostGraph, GroundTruth};
use amwc_core::solver::solve;
use amwc_core::train::{gen_task, train, LinearCostModel, SyntheticTask, TaskSpec, TrainConfig};

fn run_in_pool(threads: usize, tasks: &[SyntheticTask], cfg: &TrainConfig) -> (LinearCostModel, Vec<String>) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let init = LinearCostModel::identity(4, tasks[0].edge_dim, 1.0, 0.1);
        let (model, log) = train(&tasks[..3], &tasks[3..], &init, cfg).unwrap();
        (model, log.iter().map(ToString::to_string).collect())
    })
}

#[test]
fn training_is_bit_identical_across_pool_sizes() {
    let tasks: Vec<SyntheticTask> = (0..5).map(|s| gen_task(s, &TaskSpec::small(0.6)).unwrap()).collect();
    let cfg = TrainConfig { iterations: 3, batch_size: 2, learning_rate: 0.01, seed: 11, ..TrainConfig::default() };
    let one = run_in_pool(1, &tasks, &cfg);
    assert_eq!(one, run_in_pool(1, &tasks, &cfg));
    assert_eq!(one, run_in_pool(4, &tasks, &cfg));
}

/// Two nodes joined by one edge with cost `c = w·x + b` and loss `a·y`.
/// The edge is cut iff `c < 0`, so the interpolated loss is `a` below
/// `-λa`, `0` above `0` and linear in between.
fn interpolated_loss(c: f64, a: f64, lambda: f64) -> f64 {
    if c < -lambda * a {
        a
    } else if c >= 0.0 {
        0.0
    } else {
        -c / lambda
    }
}

#[test]
fn parameter_gradient_matches_the_interpolated_loss() {
    let (a, lambda, x) = (2.0, 0.5, 1.5);
    let task = SyntheticTask {
        height: 1,
        width: 2,
        skeleton: CostGraph::new(2, 1, vec![(0, 1)], vec![0.0; 2], vec![0.0], &[0]).unwrap(),
        node_features: vec![0.0, 0.0],
        node_dim: 1,
        edge_features: vec![x],
        edge_dim: 1,
        ground_truth: GroundTruth::new(vec![0, 0], vec![0], vec![1.0]).unwrap(),
    };
    let h = 1e-6;
    let mut checked = 0;
    for k in 0..=400 {
        let weight = -2.0 + 4.0 * k as f64 / 400.0;
        let mut model = LinearCostModel::zeros(1, 1, 1);
        model.edge_weights[0] = weight;
        model.edge_bias = 0.1;
        let c = weight * x + 0.1;
        if (c + lambda * a).abs() < 1e-3 || c.abs() < 1e-3 {
            continue;
        }
        let g = model.costs(&task).unwrap();
        let fwd = solve(&g);
        let cost_grad = backward_edge(&g, &fwd, &[a], lambda).unwrap();
        let theta = model.backprop(&task, &cost_grad).unwrap();
        // parameters: node weight, node bias, edge weight, edge bias
        let fd_w = (interpolated_loss((weight + h) * x + 0.1, a, lambda)
            - interpolated_loss((weight - h) * x + 0.1, a, lambda))
            / (2.0 * h);
        let fd_b = (interpolated_loss(c + h, a, lambda) - interpolated_loss(c - h, a, lambda)) / (2.0 * h);
        assert!((theta[2] - fd_w).abs() < 1e-6, "w = {weight}: {} vs {fd_w}", theta[2]);
        assert!((theta[3] - fd_b).abs() < 1e-6, "w = {weight}: {} vs {fd_b}", theta[3]);
        assert_eq!(&theta[..2], &[0.0, 0.0]);
        checked += 1;
    }
    assert!(checked > 380);
}
