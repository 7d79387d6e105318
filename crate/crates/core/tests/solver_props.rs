use amwc_core::graph::{check_feasibility, evaluate, CostGraph};
use amwc_core::oracle::brute_force;
use amwc_core::random::{attractive_graph, permute_nodes, random_graph, random_permutation, GraphSpec};
use amwc_core::solver::{solve, solve_traced, SolveTrace};

/// Replays the merge sequence on plain cluster vectors and returns the
/// objective after every merge, starting with the singleton state.
fn replay(g: &CostGraph, trace: &SolveTrace) -> Vec<f64> {
    let n = g.num_nodes();
    let mut cluster: Vec<usize> = (0..n).collect();
    let mut classes = trace.initial_classes.clone();
    let value = |cluster: &[usize], classes: &[usize]| {
        let cut: Vec<bool> = g.edges().iter().map(|&(i, j)| cluster[i] != cluster[j]).collect();
        evaluate(g, classes, &cut)
    };
    let mut values = vec![value(&cluster, &classes)];
    for m in &trace.merges {
        for i in 0..n {
            if cluster[i] == m.absorbed {
                cluster[i] = m.survivor;
            }
        }
        for i in 0..n {
            if cluster[i] == m.survivor {
                classes[i] = m.class;
            }
        }
        values.push(value(&cluster, &classes));
    }
    values
}

fn singleton_objective(g: &CostGraph) -> f64 {
    let nodes: f64 = (0..g.num_nodes())
        .map(|i| g.node_row(i).iter().copied().fold(f64::INFINITY, f64::min))
        .sum();
    nodes + g.edge_costs().iter().sum::<f64>()
}

#[test]
fn solutions_are_feasible() {
    let spec = GraphSpec::new(200, 6);
    for seed in 0..300 {
        let g = random_graph(seed, &spec);
        let lab = solve(&g);
        assert!(check_feasibility(&g, &lab).is_ok(), "seed {seed}: {:?}", check_feasibility(&g, &lab));
        assert_eq!(lab.objective, evaluate(&g, &lab.classes, &lab.cut));
    }
}

#[test]
fn each_merge_lowers_the_objective_by_its_similarity() {
    let spec = GraphSpec::new(60, 5);
    for seed in 0..200 {
        let g = random_graph(seed, &spec);
        let (_, trace) = solve_traced(&g);
        let values = replay(&g, &trace);
        assert!((values[0] - singleton_objective(&g)).abs() < 1e-9);
        assert!((values[0] - trace.initial_objective).abs() < 1e-9);
        for (step, m) in trace.merges.iter().enumerate() {
            assert!(m.similarity >= 0.0);
            let drop = values[step] - values[step + 1];
            assert!((drop - m.similarity).abs() < 1e-9, "seed {seed} step {step}: {drop} vs {}", m.similarity);
        }
        let last = *values.last().unwrap();
        assert!((last - trace.contracted_objective).abs() < 1e-9);
        assert!(last <= values[0] + 1e-9);
    }
}

#[test]
fn heuristic_never_beats_the_oracle() {
    let spec = GraphSpec::new(7, 3);
    for seed in 0..100 {
        let g = random_graph(seed, &spec);
        let exact = brute_force(&g).unwrap();
        assert!(check_feasibility(&g, &exact).is_ok());
        assert!(solve(&g).objective >= exact.objective - 1e-9, "seed {seed}");
    }
}

#[test]
fn heuristic_is_optimal_on_attractive_dominant_instances() {
    let spec = GraphSpec::new(7, 3);
    for seed in 0..100 {
        let g = attractive_graph(seed, &spec);
        let exact = brute_force(&g).unwrap();
        assert!((solve(&g).objective - exact.objective).abs() < 1e-9, "seed {seed}");
    }
}

#[test]
fn oracle_ignores_node_order() {
    let spec = GraphSpec::new(8, 3);
    for seed in 0..60 {
        let g = random_graph(seed, &spec);
        let perm = random_permutation(seed ^ 0xabc, g.num_nodes());
        let moved = permute_nodes(&g, &perm);
        let (a, b) = (brute_force(&g).unwrap(), brute_force(&moved).unwrap());
        assert!((a.objective - b.objective).abs() < 1e-12, "seed {seed}");
    }
}

#[test]
fn solve_is_deterministic_across_pool_sizes() {
    let spec = GraphSpec::new(120, 4);
    let graphs: Vec<CostGraph> = (0..40).map(|s| random_graph(s, &spec)).collect();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| amwc_core::par::map_indexed(graphs.len(), |i| solve(&graphs[i])))
    };
    assert_eq!(run(1), run(4));
    assert_eq!(run(1), run(1));
}
