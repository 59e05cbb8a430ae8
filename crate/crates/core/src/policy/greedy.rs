use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, SearchGraph};
use crate::operators::DebugBudget;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreedyConfig {
    /// Probability of diverting selection to a debuggable buggy node.
    pub epsilon_bug: f64,
    /// Number of drafts seeded from the root.
    pub n_drafts: usize,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig {
            epsilon_bug: 1.0,
            n_drafts: 5,
        }
    }
}

/// Greedy selection over fitness with an `epsilon_bug` detour to buggy leaves.
///
/// Buggy candidates are leaves whose debug chain still has budget for an
/// attempt costing `debug_cost` ticks. Falls back to the root when no valid
/// node exists.
pub fn greedy_select<R: Rng + ?Sized>(
    graph: &SearchGraph,
    cfg: &GreedyConfig,
    budget: &DebugBudget,
    debug_cost: u64,
    rng: &mut R,
) -> NodeId {
    if rng.random::<f64>() < cfg.epsilon_bug {
        let buggy: Vec<NodeId> = graph
            .nodes()
            .iter()
            .filter(|n| n.is_leaf() && budget.permits(n, debug_cost))
            .map(|n| n.id)
            .collect();
        if !buggy.is_empty() {
            return buggy[rng.random_range(0..buggy.len())];
        }
    }
    let mut best: Option<(NodeId, f64)> = None;
    for node in graph.valid_nodes() {
        let f = node.fitness.unwrap_or(0.0);
        if best.is_none_or(|(_, b)| f > b) {
            best = Some((node.id, f));
        }
    }
    best.map_or(graph.root_id(), |(id, _)| id)
}
