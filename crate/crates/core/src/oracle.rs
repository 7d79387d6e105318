//! Exact AMWC by enumeration, for tiny instances only.
//!
//! Every set partition of the nodes is visited as a restricted growth string
//! (block ids in order of first occurrence). For a fixed partition the cut
//! cost is fixed and the class assignment is a small dynamic program over
//! blocks, with the set of already used non-partitionable classes as state.
//! The first optimum in enumeration order wins.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{ClassId, CostGraph, Labeling};

pub const MAX_NODES: usize = 10;
pub const MAX_CLASSES: usize = 4;

/// Optimal labeling of `g`. Fails for more than `MAX_NODES` nodes or
/// `MAX_CLASSES` classes.
pub fn brute_force(g: &CostGraph) -> Result<Labeling> {
    let n = g.num_nodes();
    let k = g.num_classes();
    if n > MAX_NODES || k > MAX_CLASSES {
        return Err(Error::OracleSizeLimit {
            nodes: n,
            classes: k,
            max_nodes: MAX_NODES,
            max_classes: MAX_CLASSES,
        });
    }
    let stuff_bit: Vec<usize> = (0..k)
        .map(|c| if g.is_partitionable(c) { 0 } else { 1 << c })
        .collect();
    let masks = 1usize << k;

    let mut blocks = vec![0usize; n];
    let mut best_total = f64::INFINITY;
    let mut best_blocks = blocks.clone();
    let mut best_classes: Vec<ClassId> = Vec::new();

    let mut block_cost = vec![0.0; n * k];
    let mut table = vec![0.0; (n + 1) * masks];
    let mut choice = vec![usize::MAX; n * masks];

    loop {
        let num_blocks = blocks.iter().copied().max().map_or(0, |m| m + 1);
        let cut: f64 = g
            .edges()
            .iter()
            .zip(g.edge_costs())
            .filter(|(&(i, j), _)| blocks[i] != blocks[j])
            .map(|(_, &c)| c)
            .sum();

        block_cost[..num_blocks * k].iter_mut().for_each(|c| *c = 0.0);
        for (i, &b) in blocks.iter().enumerate() {
            for c in 0..k {
                block_cost[b * k + c] += g.node_cost(i, c);
            }
        }

        // table[b][mask]: cheapest assignment of blocks b.. given used stuff classes
        for mask in 0..masks {
            table[num_blocks * masks + mask] = 0.0;
        }
        for b in (0..num_blocks).rev() {
            for mask in 0..masks {
                let mut best = f64::INFINITY;
                let mut arg = usize::MAX;
                for c in 0..k {
                    if mask & stuff_bit[c] != 0 {
                        continue;
                    }
                    let v = block_cost[b * k + c] + table[(b + 1) * masks + (mask | stuff_bit[c])];
                    if v < best {
                        best = v;
                        arg = c;
                    }
                }
                table[b * masks + mask] = best;
                choice[b * masks + mask] = arg;
            }
        }

        let total = cut + table[0];
        if total < best_total {
            best_total = total;
            best_blocks.copy_from_slice(&blocks);
            best_classes.clear();
            let mut mask = 0;
            for b in 0..num_blocks {
                let c = choice[b * masks + mask];
                best_classes.push(c);
                mask |= stuff_bit[c];
            }
        }

        if !next_partition(&mut blocks) {
            break;
        }
    }

    Ok(Labeling::from_clusters(g, &best_blocks, |b| best_classes[b]))
}

/// Advances a restricted growth string to the next set partition.
fn next_partition(rgs: &mut [usize]) -> bool {
    let n = rgs.len();
    for i in (1..n).rev() {
        let prefix_max = rgs[..i].iter().copied().max().unwrap_or(0);
        if rgs[i] <= prefix_max {
            rgs[i] += 1;
            rgs[i + 1..].iter_mut().for_each(|x| *x = 0);
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use crate::graph::check_feasibility;

    #[test]
    fn enumerates_bell_numbers() {
        for (n, bell) in [(1, 1), (2, 2), (3, 5), (4, 15), (5, 52), (6, 203)] {
            let mut rgs = vec![0; n];
            let mut count = 1;
            while next_partition(&mut rgs) {
                count += 1;
            }
            assert_eq!(count, bell, "n = {n}");
        }
    }

    #[test]
    fn single_node_takes_argmin() {
        let g = CostGraph::new(1, 2, vec![], vec![2.0, 1.0], vec![], &[]).unwrap();
        let lab = brute_force(&g).unwrap();
        assert_eq!((lab.classes[0], lab.objective), (1, 1.0));
    }

    #[test]
    fn repulsive_pair_is_cut() {
        let g = CostGraph::new(2, 2, vec![(0, 1)], vec![0.0; 4], vec![-5.0], &[0, 1]).unwrap();
        let lab = brute_force(&g).unwrap();
        assert_eq!(lab.objective, -5.0);
        assert!(lab.cut[0]);
    }

    #[test]
    fn stuff_cannot_be_split_even_when_profitable() {
        let g = CostGraph::new(2, 1, vec![(0, 1)], vec![0.0; 2], vec![-5.0], &[]).unwrap();
        let lab = brute_force(&g).unwrap();
        assert_eq!(lab.objective, 0.0);
        assert!(check_feasibility(&g, &lab).is_ok());
    }

    #[test]
    fn size_limit() {
        let g = CostGraph::new(11, 1, vec![], vec![0.0; 11], vec![], &[]).unwrap();
        let err = brute_force(&g).unwrap_err();
        assert!(err.to_string().contains("oracle size limit"));
        let g = CostGraph::new(2, 5, vec![], vec![0.0; 10], vec![], &[]).unwrap();
        assert!(matches!(brute_force(&g), Err(Error::OracleSizeLimit { .. })));
    }
}
