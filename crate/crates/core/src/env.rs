//! The boundary between the search engine and whatever executes operators.

use crate::error::Result;
use crate::graph::{SearchGraph, Status};
use crate::operators::OperatorCall;

/// Result of executing one operator call.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub status: Status,
    pub plan: String,
    pub code: String,
    pub execution: String,
    /// Validation metric, raw units. Present iff `status` is valid.
    pub val_score: Option<f64>,
    /// Held-out metric, raw units, when the environment can grade one.
    pub test_score: Option<f64>,
}

/// Executes operator calls against a task.
///
/// The engine commits every returned outcome as the next node of the graph,
/// so an environment may key per-node state on `graph.len()` at call time.
pub trait Environment {
    fn apply(&mut self, call: &OperatorCall, graph: &SearchGraph) -> Result<Outcome>;

    /// Whether held-out scores come from a simulator (oracle modes need this).
    fn is_simulated(&self) -> bool {
        false
    }

    /// Serializable hidden state for checkpoints.
    fn snapshot(&self) -> serde_json::Value {
        serde_json::Value::Null
    }

    fn restore(&mut self, _state: serde_json::Value) -> Result<()> {
        Ok(())
    }
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn apply(&mut self, call: &OperatorCall, graph: &SearchGraph) -> Result<Outcome> {
        (**self).apply(call, graph)
    }

    fn is_simulated(&self) -> bool {
        (**self).is_simulated()
    }

    fn snapshot(&self) -> serde_json::Value {
        (**self).snapshot()
    }

    fn restore(&mut self, state: serde_json::Value) -> Result<()> {
        (**self).restore(state)
    }
}
