use crate::graph::{GraphError, Infeasibility};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    Graph(#[from] GraphError),
    #[error("constraint violation: {0}")]
    Infeasible(#[from] Infeasibility),
    #[error("invalid ground truth: {0}")]
    InvalidGroundTruth(&'static str),
    #[error("oracle size limit: {nodes} nodes, {classes} classes (max {max_nodes} nodes, {max_classes} classes)")]
    OracleSizeLimit { nodes: usize, classes: usize, max_nodes: usize, max_classes: usize },
    #[error("stale edge: clusters {0} and {1} are not live neighbours")]
    StaleEdge(usize, usize),
    #[error("shape mismatch: {0}")]
    Shape(&'static str),
    #[error("interpolation range must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("could not place {requested} instances after {attempts} attempts")]
    Placement { requested: usize, attempts: usize },
}
