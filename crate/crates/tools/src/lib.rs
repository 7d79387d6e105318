//! File formats, training driver, invariant checks and the `amwc` command
//! line on top of `amwc-core`.

pub mod cli;
pub mod experiment;
pub mod format;
pub mod gradcheck;
pub mod render;
