//! Feature selection for regression problems.
//!
//! The pipeline wraps an elastic net inside a multi-objective particle
//! swarm search over feature masks and the regularization strength,
//! then fuses the resulting Pareto set into one stable subset: Pareto
//! members are weighted by normalized adjusted R2, features are scored
//! by their extra sum of squares within each member, and the scores are
//! combined by simple additive weighting. Benchmark selectors (a
//! GA-wrapped linear regression and an elastic-net lambda grid) and a
//! Wilcoxon signed-rank comparison round out the toolkit.

pub mod benchmarks;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod fusion;
pub mod mopso;
pub mod regression;
pub mod report;
pub mod seeds;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
