use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, SearchGraph};
use crate::operators::DebugBudget;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MctsConfig {
    pub uct_c: f64,
    /// Keeps the exploration term finite for unvisited children.
    pub uct_epsilon: f64,
    /// Children created per expansion.
    pub num_children: usize,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig {
            uct_c: 0.25,
            uct_epsilon: 1e-6,
            num_children: 5,
        }
    }
}

/// `Q + c * sqrt(ln N(parent) / (N(child) + eps))`.
pub fn uct_score(child_q: f64, child_n: u64, parent_n: u64, cfg: &MctsConfig) -> Result<f64> {
    if parent_n < 1 {
        return Err(Error::InvalidArgument(
            "parent visit count must be at least 1".into(),
        ));
    }
    let explore = ((parent_n as f64).ln() / (child_n as f64 + cfg.uct_epsilon)).sqrt();
    Ok(child_q + cfg.uct_c * explore)
}

/// Marks nodes that can never be usefully expanded again: buggy leaves whose
/// debug chain is out of budget, and buggy nodes all of whose children are
/// such dead ends. Children always have larger ids than their parents.
fn exhausted(graph: &SearchGraph, budget: &DebugBudget, debug_cost: u64) -> Vec<bool> {
    let nodes = graph.nodes();
    let mut dead = vec![false; nodes.len()];
    for node in nodes.iter().rev() {
        dead[node.id.0] = node.is_buggy()
            && if node.is_leaf() {
                !budget.permits(node, debug_cost)
            } else {
                node.children.iter().all(|c| dead[c.0])
            };
    }
    dead
}

/// UCT descent from the root.
///
/// Moves to the best-scoring child (lowest id on ties) until reaching a node
/// without live children, skipping dead-end buggy branches.
pub fn mcts_select(
    graph: &SearchGraph,
    cfg: &MctsConfig,
    budget: &DebugBudget,
    debug_cost: u64,
) -> Result<NodeId> {
    let dead = exhausted(graph, budget, debug_cost);
    let mut cur = graph.root();
    loop {
        let mut best: Option<(NodeId, f64)> = None;
        for &c in &cur.children {
            if dead[c.0] {
                continue;
            }
            let child = graph.node(c)?;
            let score = uct_score(
                child.mean_fitness,
                child.visit_count,
                cur.visit_count.max(1),
                cfg,
            )?;
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((c, score));
            }
        }
        match best {
            Some((next, _)) => cur = graph.node(next)?,
            None => return Ok(cur.id),
        }
    }
}

/// Propagates a freshly evaluated leaf's fitness to its ancestors with the
/// incremental mean update.
pub fn mcts_backup(graph: &mut SearchGraph, leaf: NodeId, leaf_fitness: f64) -> Result<()> {
    let node = graph.node(leaf)?;
    if node.visit_count == 0 || node.eval_fitness.is_none() {
        return Err(Error::Unevaluated(leaf));
    }
    let path = graph.lineage(leaf)?;
    for &u in &path[1..] {
        let node = graph.node_mut(u)?;
        node.visit_count += 1;
        node.mean_fitness += (leaf_fitness - node.mean_fitness) / node.visit_count as f64;
    }
    Ok(())
}
