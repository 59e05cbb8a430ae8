//! Operators, the operator policies, scoped memory and debug budgeting.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{ArtifactNode, NodeId, Origin, SearchGraph, Status};
use crate::policy::GreedyConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Draft,
    Debug,
    Improve,
    Crossover,
    /// Handcrafted; builds memory views and never produces a node.
    Memory,
}

impl OperatorKind {
    pub fn arity(self) -> usize {
        match self {
            OperatorKind::Crossover => 2,
            OperatorKind::Memory => 0,
            _ => 1,
        }
    }

    pub fn origin(self) -> Option<Origin> {
        match self {
            OperatorKind::Draft => Some(Origin::Draft),
            OperatorKind::Debug => Some(Origin::Debug),
            OperatorKind::Improve => Some(Origin::Improve),
            OperatorKind::Crossover => Some(Origin::Crossover),
            OperatorKind::Memory => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OperatorKind::Draft => "draft",
            OperatorKind::Debug => "debug",
            OperatorKind::Improve => "improve",
            OperatorKind::Crossover => "crossover",
            OperatorKind::Memory => "memory",
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which operator family a search uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorSet {
    /// Draft/Debug/Improve with a global running memory.
    Aide,
    /// Adds Crossover, the complexity cue and scoped memory.
    #[default]
    Aira,
}

impl OperatorSet {
    pub fn allows_crossover(self) -> bool {
        self == OperatorSet::Aira
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityCue {
    Minimal,
    Moderate,
    Advanced,
}

/// Complexity directive from the number of children of the processed node.
///
/// `n_children == 4` falls in the gap between the moderate and advanced
/// ranges and is mapped to `Moderate`.
pub fn complexity_cue(n_children: usize) -> ComplexityCue {
    match n_children {
        0 | 1 => ComplexityCue::Minimal,
        2..=4 => ComplexityCue::Moderate,
        _ => ComplexityCue::Advanced,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryScope {
    Siblings,
    AncestralDebugChain,
    Global,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub node: NodeId,
    /// First line of the node's plan.
    pub plan: String,
    pub fitness: Option<f64>,
    pub status: Status,
}

impl MemoryEntry {
    fn from_node(node: &ArtifactNode) -> Self {
        MemoryEntry {
            node: node.id,
            plan: plan_digest(&node.plan),
            fitness: node.fitness,
            status: node.status,
        }
    }
}

fn plan_digest(plan: &str) -> String {
    const MAX: usize = 160;
    let line = plan
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    match line.char_indices().nth(MAX) {
        Some((cut, _)) => format!("{}...", &line[..cut]),
        None => line.to_string(),
    }
}

/// Output of the Memory operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryView {
    pub scope: MemoryScope,
    pub entries: Vec<MemoryEntry>,
}

impl MemoryView {
    pub fn empty(scope: MemoryScope) -> Self {
        MemoryView {
            scope,
            entries: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<NodeId> {
        self.entries.iter().map(|e| e.node).collect()
    }

    /// Markdown bullet list used inside prompts.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let fitness = match e.fitness {
                Some(f) => format!("{f:.4}"),
                None => "n/a".to_string(),
            };
            out.push_str(&format!(
                "- node {}: {} (fitness {}, {})",
                e.node.0,
                e.plan,
                fitness,
                e.status.as_str()
            ));
        }
        out
    }
}

/// Builds the memory view handed to an operator applied to `target`.
///
/// AIRA scopes memory to the target's children for Draft/Improve/Crossover
/// and to the contiguous Debug-chain ancestors for Debug. AIDE keeps a global
/// summary of every Draft/Improve node and gives Debug no memory.
pub fn scoped_memory(
    graph: &SearchGraph,
    target: NodeId,
    kind: OperatorKind,
    set: OperatorSet,
) -> Result<MemoryView> {
    let node = graph.node(target)?;
    let view = match (set, kind) {
        (OperatorSet::Aira, OperatorKind::Debug) => {
            let mut entries = Vec::new();
            let mut cur = node;
            while cur.origin == Origin::Debug {
                let Some(parent) = cur.primary_parent() else {
                    break;
                };
                let parent = graph.node(parent)?;
                if parent.origin != Origin::Debug {
                    break;
                }
                entries.push(MemoryEntry::from_node(parent));
                cur = parent;
            }
            MemoryView {
                scope: MemoryScope::AncestralDebugChain,
                entries,
            }
        }
        (OperatorSet::Aira, _) => MemoryView {
            scope: MemoryScope::Siblings,
            entries: node
                .children
                .iter()
                .map(|&c| graph.node(c).map(MemoryEntry::from_node))
                .collect::<Result<_>>()?,
        },
        (OperatorSet::Aide, OperatorKind::Debug) => MemoryView::empty(MemoryScope::Global),
        (OperatorSet::Aide, _) => MemoryView {
            scope: MemoryScope::Global,
            entries: graph
                .nodes()
                .iter()
                .filter(|n| n.id != target && matches!(n.origin, Origin::Draft | Origin::Improve))
                .map(MemoryEntry::from_node)
                .collect(),
        },
    };
    Ok(view)
}

/// One operator request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorCall {
    pub kind: OperatorKind,
    pub targets: Vec<NodeId>,
    pub memory: MemoryView,
    pub complexity: Option<ComplexityCue>,
    /// Ticks left in the run when the call is issued.
    pub budget: u64,
}

/// Fixed-rule operator policy shared by the greedy agents.
pub fn aide_operator_policy(
    graph: &SearchGraph,
    selected: NodeId,
    cfg: &GreedyConfig,
) -> Result<OperatorKind> {
    let node = graph.node(selected)?;
    if graph.count_origin(Origin::Draft) < cfg.n_drafts {
        return Ok(OperatorKind::Draft);
    }
    Ok(match node.status {
        Status::Valid => OperatorKind::Improve,
        Status::Buggy => OperatorKind::Debug,
        // the root is only selected when nothing else is usable
        Status::Unevaluated => OperatorKind::Draft,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DebugVerdict {
    Continue,
    Abandon,
}

/// Per-chain debugging allowance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DebugBudget {
    pub max_chain_nodes: u32,
    pub max_chain_ticks: u64,
}

/// Engine clock rate: one tick is five minutes of agent time.
pub const TICKS_PER_HOUR: f64 = 12.0;

impl Default for DebugBudget {
    /// 10 nodes or 12 hours.
    fn default() -> Self {
        DebugBudget::from_hours(10, 12.0, TICKS_PER_HOUR)
    }
}

impl DebugBudget {
    /// Limits expressed in hours, converted with the engine clock rate.
    pub fn from_hours(max_chain_nodes: u32, hours: f64, ticks_per_hour: f64) -> Self {
        DebugBudget {
            max_chain_nodes,
            max_chain_ticks: (hours * ticks_per_hour).round().max(0.0) as u64,
        }
    }

    pub fn check(&self, chain_nodes: u32, chain_elapsed: u64) -> DebugVerdict {
        if chain_nodes >= self.max_chain_nodes || chain_elapsed >= self.max_chain_ticks {
            DebugVerdict::Abandon
        } else {
            DebugVerdict::Continue
        }
    }

    /// Whether one more Debug attempt of `attempt_cost` ticks may be spent on
    /// a buggy node without the chain overrunning either limit.
    pub fn permits(&self, node: &ArtifactNode, attempt_cost: u64) -> bool {
        node.is_buggy()
            && self.check(node.debug_depth, node.debug_ticks) == DebugVerdict::Continue
            && node.debug_ticks + attempt_cost <= self.max_chain_ticks
    }
}

/// Continue/abandon decision under the default limits (10 nodes, 12 hours).
pub fn debug_budget_check(chain_nodes: u32, chain_elapsed: u64) -> DebugVerdict {
    DebugBudget::default().check(chain_nodes, chain_elapsed)
}

/// Tick price of each operator application.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TickCosts {
    pub draft: u64,
    pub improve: u64,
    pub debug: u64,
    pub crossover: u64,
}

impl Default for TickCosts {
    fn default() -> Self {
        TickCosts {
            draft: 1,
            improve: 1,
            debug: 1,
            crossover: 1,
        }
    }
}

impl TickCosts {
    pub fn of(&self, kind: OperatorKind) -> u64 {
        match kind {
            OperatorKind::Draft => self.draft,
            OperatorKind::Improve => self.improve,
            OperatorKind::Debug => self.debug,
            OperatorKind::Crossover => self.crossover,
            OperatorKind::Memory => 0,
        }
    }
}

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";

/// Splits reasoning spans out of a model response.
///
/// Returns `(visible, thought)`. An unterminated `<think>` swallows the rest
/// of the text.
pub fn strip_think(raw: &str) -> (String, String) {
    let mut visible = raw.to_string();
    let mut thought = String::new();
    // removing a span can splice a new delimiter together, so run to a fixed point
    while visible.contains(THINK_OPEN) {
        let (v, t) = strip_once(&visible);
        visible = v;
        thought.push_str(&t);
    }
    (visible, thought)
}

fn strip_once(raw: &str) -> (String, String) {
    let mut visible = String::with_capacity(raw.len());
    let mut thought = String::new();
    let mut rest = raw;
    while let Some(start) = rest.find(THINK_OPEN) {
        visible.push_str(&rest[..start]);
        let inner = &rest[start + THINK_OPEN.len()..];
        match inner.find(THINK_CLOSE) {
            Some(end) => {
                thought.push_str(&inner[..end]);
                rest = &inner[end + THINK_CLOSE.len()..];
            }
            None => {
                thought.push_str(inner);
                rest = "";
            }
        }
    }
    visible.push_str(rest);
    (visible, thought)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::graph::NodePayload;

    fn payload(origin: Origin, status: Status) -> NodePayload {
        let score = (status == Status::Valid).then_some(0.5);
        NodePayload::new(origin, status).with_scores(score, score)
    }

    #[test]
    fn cue_table() {
        assert_eq!(complexity_cue(0), ComplexityCue::Minimal);
        assert_eq!(complexity_cue(3), ComplexityCue::Moderate);
        assert_eq!(complexity_cue(4), ComplexityCue::Moderate);
        assert_eq!(complexity_cue(5), ComplexityCue::Advanced);
    }

    #[test]
    fn sibling_memory_at_root() {
        let mut g = SearchGraph::with_root();
        for _ in 0..3 {
            g.add_node(&[NodeId(0)], payload(Origin::Draft, Status::Valid))
                .unwrap();
        }
        let v = scoped_memory(&g, NodeId(0), OperatorKind::Draft, OperatorSet::Aira).unwrap();
        assert_eq!(v.scope, MemoryScope::Siblings);
        assert_eq!(v.ids(), vec![NodeId(1), NodeId(2), NodeId(3)]);
        let v = scoped_memory(&g, NodeId(2), OperatorKind::Improve, OperatorSet::Aira).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn debug_chain_memory() {
        let mut g = SearchGraph::with_root();
        let b = g
            .add_node(&[NodeId(0)], payload(Origin::Draft, Status::Buggy))
            .unwrap();
        let d1 = g
            .add_node(&[b], payload(Origin::Debug, Status::Buggy))
            .unwrap();
        let d2 = g
            .add_node(&[d1], payload(Origin::Debug, Status::Buggy))
            .unwrap();
        let d3 = g
            .add_node(&[d2], payload(Origin::Debug, Status::Buggy))
            .unwrap();
        let v = scoped_memory(&g, d3, OperatorKind::Debug, OperatorSet::Aira).unwrap();
        assert_eq!(v.scope, MemoryScope::AncestralDebugChain);
        assert_eq!(v.ids(), vec![d2, d1]);
        let v = scoped_memory(&g, b, OperatorKind::Debug, OperatorSet::Aira).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn aide_global_memory() {
        let mut g = SearchGraph::with_root();
        let a = g
            .add_node(&[NodeId(0)], payload(Origin::Draft, Status::Valid))
            .unwrap();
        let b = g
            .add_node(&[NodeId(0)], payload(Origin::Draft, Status::Buggy))
            .unwrap();
        let d = g
            .add_node(&[b], payload(Origin::Debug, Status::Valid))
            .unwrap();
        let i = g
            .add_node(&[d], payload(Origin::Improve, Status::Valid))
            .unwrap();
        let v = scoped_memory(&g, a, OperatorKind::Improve, OperatorSet::Aide).unwrap();
        assert_eq!(v.scope, MemoryScope::Global);
        assert_eq!(v.ids(), vec![b, i]);
        let v = scoped_memory(&g, b, OperatorKind::Debug, OperatorSet::Aide).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn aide_policy_rule() {
        let cfg = GreedyConfig {
            epsilon_bug: 0.0,
            n_drafts: 5,
        };
        let mut g = SearchGraph::with_root();
        let a = g
            .add_node(&[NodeId(0)], payload(Origin::Draft, Status::Valid))
            .unwrap();
        g.add_node(&[NodeId(0)], payload(Origin::Draft, Status::Valid))
            .unwrap();
        assert_eq!(
            aide_operator_policy(&g, a, &cfg).unwrap(),
            OperatorKind::Draft
        );
        for _ in 0..2 {
            g.add_node(&[NodeId(0)], payload(Origin::Draft, Status::Valid))
                .unwrap();
        }
        let bug = g
            .add_node(&[NodeId(0)], payload(Origin::Draft, Status::Buggy))
            .unwrap();
        assert_eq!(
            aide_operator_policy(&g, a, &cfg).unwrap(),
            OperatorKind::Improve
        );
        assert_eq!(
            aide_operator_policy(&g, bug, &cfg).unwrap(),
            OperatorKind::Debug
        );
        assert_eq!(
            aide_operator_policy(&g, NodeId(0), &cfg).unwrap(),
            OperatorKind::Draft
        );
    }

    #[test]
    fn budget_check_cases() {
        let hour = TICKS_PER_HOUR as u64;
        assert_eq!(debug_budget_check(9, hour), DebugVerdict::Continue);
        assert_eq!(debug_budget_check(10, hour), DebugVerdict::Abandon);
        assert_eq!(debug_budget_check(3, 12 * hour), DebugVerdict::Abandon);
        assert_eq!(debug_budget_check(3, 12 * hour - 1), DebugVerdict::Continue);
        let b = DebugBudget::from_hours(10, 12.0, 4.0);
        assert_eq!(b.max_chain_ticks, 48);
        assert_eq!(b.check(3, 47), DebugVerdict::Continue);
    }

    #[test]
    fn strip_think_cases() {
        assert_eq!(
            strip_think("<think>plan...</think>answer"),
            ("answer".to_string(), "plan...".to_string())
        );
        assert_eq!(strip_think("plain"), ("plain".to_string(), String::new()));
        assert_eq!(
            strip_think("a<think>x</think>b<think>y</think>c"),
            ("abc".to_string(), "xy".to_string())
        );
        assert_eq!(
            strip_think("head<think>never closed"),
            ("head".to_string(), "never closed".to_string())
        );
        assert_eq!(
            strip_think("<th<think>x</think>ink>y"),
            (String::new(), "xy".to_string())
        );
    }

    proptest! {
        #[test]
        fn strip_think_idempotent(s in "(<think>|</think>|<th|ink>|[a-c ])*") {
            let (once, _) = strip_think(&s);
            let (twice, extra) = strip_think(&once);
            prop_assert_eq!(&once, &twice);
            prop_assert!(extra.is_empty());
            prop_assert!(!once.contains(THINK_OPEN));
        }
    }
}
