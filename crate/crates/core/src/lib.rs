//! Graph-based search orchestration for iterative artifact-refinement agents.

pub mod checkpoint;
pub mod config;
pub mod env;
pub mod error;
pub mod experiment;
pub mod export;
pub mod fitness;
pub mod graph;
pub mod llm;
pub mod operators;
pub mod policy;
pub mod report;
pub mod search;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
