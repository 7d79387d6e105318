//! Asymmetric multiway cut (AMWC) for panoptic segmentation: a greedy
//! contraction solver, an exact enumeration oracle, panoptic quality and its
//! differentiable surrogate, perturbation gradients through the solver, and
//! a small training harness.
//!
//! `no_std` with `alloc`. The `parallel` feature spreads independent solves
//! over a rayon pool; results are reduced in index order either way.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod blackbox;
pub mod error;
pub mod graph;
pub mod matching;
pub mod metrics;
pub mod oracle;
pub mod par;
pub mod random;
pub mod seed;
pub mod solver;
pub mod train;

pub use blackbox::{CostGradient, PerturbConfig};
pub use error::{Error, Result};
pub use graph::{ClassId, CostGraph, GroundTruth, Labeling, NodeId, SegmentId};
pub use metrics::{MatchSet, Panoptic, PqReport, SegmentGradient};
pub use solver::{solve, solve_traced};
