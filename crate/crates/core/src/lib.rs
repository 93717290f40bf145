//! Causal structure learning from observational tables.
//!
//! A policy network proposes directed graphs, a decomposable BIC score with
//! acyclicity penalties rewards them, and the best DAG found is annotated with
//! inverse-information-entropy edge strengths, pruned, and rendered as JSON,
//! DOT and a markdown root-cause report.

pub mod data;
pub mod error;
pub mod graph;
pub mod numeric;
pub mod pipeline;
pub mod policy;
pub mod scoring;
pub mod sim;
pub mod strength;

pub use error::{Error, Result};
