//! Synthetic grid segmentation tasks.
//!
//! A task is a `height × width` image split into horizontal stuff bands with
//! axis-aligned thing rectangles painted on top (later ones occlude earlier
//! ones). Node features are the one-hot reference class plus Gaussian noise;
//! each edge carries `+1` (same reference segment) or `-1` (different) plus
//! noise in the slot of its distance band.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::{grid_graph, ClassId, CostGraph, GroundTruth, NodeId};
use crate::seed;

const MAX_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub height: usize,
    pub width: usize,
    pub num_instances: usize,
    pub thing_classes: usize,
    pub stuff_classes: usize,
    pub noise: f64,
    pub distances: Vec<usize>,
}

impl TaskSpec {
    /// 16×16 grid, 4 instances over 2 thing and 2 stuff classes, edges at
    /// distances 1 and 4.
    pub fn small(noise: f64) -> Self {
        Self {
            height: 16,
            width: 16,
            num_instances: 4,
            thing_classes: 2,
            stuff_classes: 2,
            noise,
            distances: vec![1, 4],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.thing_classes + self.stuff_classes
    }

    /// Stuff classes come first, thing classes after them.
    pub fn is_thing(&self, class: ClassId) -> bool {
        class >= self.stuff_classes
    }

    fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidConfig("grid must be non-empty"));
        }
        if self.stuff_classes == 0 || self.stuff_classes > self.height {
            return Err(Error::InvalidConfig("need 1..=height stuff classes"));
        }
        if self.num_instances > 0 && self.thing_classes == 0 {
            return Err(Error::InvalidConfig("instances need at least one thing class"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidConfig("noise must be finite and non-negative"));
        }
        if self.distances.is_empty() || self.distances.contains(&0) {
            return Err(Error::InvalidConfig("distances must be non-empty and positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub height: usize,
    pub width: usize,
    /// Topology and partitionable set; all costs zero.
    pub skeleton: CostGraph,
    /// Row-major `nodes × node_dim`.
    pub node_features: Vec<f64>,
    pub node_dim: usize,
    /// Row-major `edges × edge_dim`, one slot per distance band.
    pub edge_features: Vec<f64>,
    pub edge_dim: usize,
    pub ground_truth: GroundTruth,
}

impl SyntheticTask {
    pub fn num_nodes(&self) -> usize {
        self.skeleton.num_nodes()
    }

    pub fn num_edges(&self) -> usize {
        self.skeleton.num_edges()
    }
}

/// Distance band of a grid edge.
fn edge_distance(width: usize, (i, j): (NodeId, NodeId)) -> usize {
    let delta = j - i;
    if delta < width {
        delta
    } else {
        delta / width
    }
}

fn connected(mask: &[bool], height: usize, width: usize) -> bool {
    let Some(start) = mask.iter().position(|&m| m) else {
        return false;
    };
    let mut seen = vec![false; mask.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut count = 0;
    while let Some(i) = queue.pop_front() {
        count += 1;
        let (r, c) = (i / width, i % width);
        let mut visit = |k: usize| {
            if mask[k] && !seen[k] {
                seen[k] = true;
                queue.push_back(k);
            }
        };
        if r > 0 {
            visit(i - width);
        }
        if r + 1 < height {
            visit(i + width);
        }
        if c > 0 {
            visit(i - 1);
        }
        if c + 1 < width {
            visit(i + 1);
        }
    }
    count == mask.iter().filter(|&&m| m).count()
}

/// Paints bands and rectangles; returns per-pixel owner keys (stuff class
/// `b` → `b`, instance `k` → `stuff_classes + k`) and instance classes.
fn paint<R: Rng>(spec: &TaskSpec, rng: &mut R) -> Option<(Vec<usize>, Vec<ClassId>)> {
    let (h, w) = (spec.height, spec.width);
    let mut cuts: Vec<usize> = Vec::new();
    while cuts.len() + 1 < spec.stuff_classes {
        let r = rng.random_range(1..h);
        if !cuts.contains(&r) {
            cuts.push(r);
        }
    }
    cuts.sort_unstable();
    let mut owner: Vec<usize> = (0..h * w)
        .map(|i| cuts.iter().filter(|&&c| i / w >= c).count())
        .collect();

    let short = h.min(w);
    let min_side = (short / 5).max(2).min(short);
    let max_side = (short / 2).max(min_side);
    let mut classes = Vec::with_capacity(spec.num_instances);
    for k in 0..spec.num_instances {
        let class = spec.stuff_classes + rng.random_range(0..spec.thing_classes);
        let rh = rng.random_range(min_side..=max_side).min(h);
        let rw = rng.random_range(min_side..=max_side).min(w);
        let r0 = rng.random_range(0..=h - rh);
        let c0 = rng.random_range(0..=w - rw);
        for r in r0..r0 + rh {
            for c in c0..c0 + rw {
                owner[r * w + c] = spec.stuff_classes + k;
            }
        }
        classes.push(class);
    }
    let min_visible = (min_side * min_side).div_ceil(2);
    for k in 0..spec.num_instances {
        let mask: Vec<bool> = owner.iter().map(|&o| o == spec.stuff_classes + k).collect();
        let area = mask.iter().filter(|&&m| m).count();
        if area < min_visible || !connected(&mask, h, w) {
            return None;
        }
    }
    Some((owner, classes))
}

/// Generates a task deterministically from `seed`.
pub fn gen_task(seed: u64, spec: &TaskSpec) -> Result<SyntheticTask> {
    spec.validate()?;
    let mut rng = seed::rng(seed, &[0]);
    let (owner, instance_classes) = (0..MAX_ATTEMPTS)
        .find_map(|_| paint(spec, &mut rng))
        .ok_or(Error::Placement { requested: spec.num_instances, attempts: MAX_ATTEMPTS })?;

    let (h, w) = (spec.height, spec.width);
    let n = h * w;
    let k = spec.num_classes();
    let class_of_owner = |o: usize| {
        if o < spec.stuff_classes {
            o
        } else {
            instance_classes[o - spec.stuff_classes]
        }
    };

    let mut dense = vec![usize::MAX; spec.stuff_classes + spec.num_instances];
    let mut segment_classes = Vec::new();
    let segments: Vec<usize> = owner
        .iter()
        .map(|&o| {
            if dense[o] == usize::MAX {
                dense[o] = segment_classes.len();
                segment_classes.push(class_of_owner(o));
            }
            dense[o]
        })
        .collect();

    let scale = (n as f64) / 256.0;
    let thresholds: Vec<f64> = (0..k)
        .map(|c| if spec.is_thing(c) { 25.0 * scale } else { 100.0 * scale })
        .collect();
    let ground_truth = GroundTruth::new(segments.clone(), segment_classes, thresholds)?;

    let mut noise_rng = seed::rng(seed, &[1]);
    let mut gaussian = move || -> f64 { spec.noise * noise_rng.sample::<f64, _>(StandardNormal) };

    let mut node_features = vec![0.0; n * k];
    for (i, &s) in segments.iter().enumerate() {
        let class = ground_truth.segment_classes()[s];
        for c in 0..k {
            node_features[i * k + c] = f64::from(u8::from(c == class)) + gaussian();
        }
    }

    let edges = grid_graph(h, w, &spec.distances);
    let mut bands: Vec<usize> = spec.distances.clone();
    bands.sort_unstable();
    bands.dedup();
    let edge_dim = bands.len();
    let mut edge_features = vec![0.0; edges.len() * edge_dim];
    for (e, &(i, j)) in edges.iter().enumerate() {
        let band = bands.binary_search(&edge_distance(w, (i, j))).unwrap_or(0);
        let sign = if segments[i] == segments[j] { 1.0 } else { -1.0 };
        edge_features[e * edge_dim + band] = sign + gaussian();
    }

    let things: Vec<ClassId> = (0..k).filter(|&c| spec.is_thing(c)).collect();
    let num_edges = edges.len();
    let skeleton = CostGraph::new(n, k, edges, vec![0.0; n * k], vec![0.0; num_edges], &things)?;
    Ok(SyntheticTask {
        height: h,
        width: w,
        skeleton,
        node_features,
        node_dim: k,
        edge_features,
        edge_dim,
        ground_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_task() {
        let spec = TaskSpec::small(0.6);
        assert_eq!(gen_task(5, &spec).unwrap(), gen_task(5, &spec).unwrap());
        assert_ne!(gen_task(5, &spec).unwrap(), gen_task(6, &spec).unwrap());
    }

    #[test]
    fn no_instances_leaves_only_stuff() {
        let spec = TaskSpec { num_instances: 0, stuff_classes: 1, ..TaskSpec::small(0.0) };
        let task = gen_task(1, &spec).unwrap();
        assert_eq!(task.ground_truth.segment_classes(), &[0]);
    }

    #[test]
    fn instances_are_visible_segments_of_thing_classes() {
        let spec = TaskSpec::small(0.0);
        for s in 0..20 {
            let task = gen_task(s, &spec).unwrap();
            let gt = &task.ground_truth;
            let things = gt.segment_classes().iter().filter(|&&c| spec.is_thing(c)).count();
            assert_eq!(things, 4);
            for c in 0..spec.num_classes() {
                assert_eq!(task.skeleton.is_partitionable(c), spec.is_thing(c));
            }
        }
    }

    #[test]
    fn noiseless_edge_features_are_signed_indicators() {
        let task = gen_task(3, &TaskSpec::small(0.0)).unwrap();
        let segs = task.ground_truth.segments();
        for (e, &(i, j)) in task.skeleton.edges().iter().enumerate() {
            let row = &task.edge_features[e * task.edge_dim..(e + 1) * task.edge_dim];
            let expected = if segs[i] == segs[j] { 1.0 } else { -1.0 };
            assert_eq!(row.iter().sum::<f64>(), expected);
            assert_eq!(row.iter().filter(|&&v| v != 0.0).count(), 1);
        }
    }

    #[test]
    fn edge_bands() {
        assert_eq!(edge_distance(16, (0, 4)), 4);
        assert_eq!(edge_distance(16, (0, 64)), 4);
        assert_eq!(edge_distance(16, (3, 19)), 1);
    }

    #[test]
    fn overcrowded_grid_fails_placement() {
        let spec = TaskSpec { height: 4, width: 4, num_instances: 30, ..TaskSpec::small(0.0) };
        assert!(matches!(gen_task(0, &spec), Err(Error::Placement { .. })));
    }
}
