//! Margin-constrained inverse combinatorial optimization.
//!
//! Given a designated solution and a weight vector, the solvers here find the
//! closest weights (squared Euclidean distance) under which the designated
//! solution beats every other feasible solution by a margin `delta`.
//! Supported structures: matroid bases, matroid intersections (arborescences,
//! s-t paths), bipartite perfect matchings, min-cost maximum flows and
//! shortest-path trees. The [`learn`] module wraps the solvers into an online
//! structured-prediction learner.

pub mod constraints;
pub mod cyclebound;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod instance;
pub mod inverse;
pub mod learn;
pub mod matroid;
pub mod oracle;
pub mod qp;

pub use error::{Error, Result};
