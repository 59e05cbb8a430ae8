//! The evolving search graph.
//!
//! Nodes are stored densely in creation order, so a [`NodeId`] doubles as an
//! index into the node vector. The first node is always the root artifact.
//! Crossover gives a node two parents, which turns the tree into a DAG; the
//! first parent is treated as the lineage parent for path-based operations.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Monotone creation index of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Valid,
    Buggy,
    Unevaluated,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Valid => "valid",
            Status::Buggy => "buggy",
            Status::Unevaluated => "unevaluated",
        }
    }
}

/// The operator that produced a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Root,
    Draft,
    Debug,
    Improve,
    Crossover,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Root => "root",
            Origin::Draft => "draft",
            Origin::Debug => "debug",
            Origin::Improve => "improve",
            Origin::Crossover => "crossover",
        }
    }

    fn arity(self) -> usize {
        match self {
            Origin::Root => 0,
            Origin::Crossover => 2,
            _ => 1,
        }
    }
}

/// One candidate solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactNode {
    pub id: NodeId,
    pub parent_ids: Vec<NodeId>,
    pub children: Vec<NodeId>,
    pub plan: String,
    pub code: String,
    /// Terminal output of the execution that scored this artifact.
    pub execution: String,
    pub status: Status,
    /// Validation metric in raw units.
    pub val_score: Option<f64>,
    /// Held-out metric in raw units.
    pub test_score: Option<f64>,
    /// Normalized proxy fitness in `[0, 1]`; always `0` for buggy nodes.
    pub fitness: Option<f64>,
    /// Fitness value this node contributed when it was evaluated and backed up.
    pub eval_fitness: Option<f64>,
    pub visit_count: u64,
    pub mean_fitness: f64,
    pub origin: Origin,
    /// Length of the contiguous Debug chain ending at this node.
    pub debug_depth: u32,
    /// Ticks spent on Debug applications along that chain.
    pub debug_ticks: u64,
    pub created_at: u64,
}

impl ArtifactNode {
    pub fn is_valid(&self) -> bool {
        self.status == Status::Valid
    }

    pub fn is_buggy(&self) -> bool {
        self.status == Status::Buggy
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// The lineage parent (first parent), if any.
    pub fn primary_parent(&self) -> Option<NodeId> {
        self.parent_ids.first().copied()
    }
}

/// What an operator application produced, before it gets an id.
#[derive(Clone, Debug, PartialEq)]
pub struct NodePayload {
    pub origin: Origin,
    pub plan: String,
    pub code: String,
    pub execution: String,
    pub status: Status,
    pub val_score: Option<f64>,
    pub test_score: Option<f64>,
    /// Ticks consumed by the operator application.
    pub cost: u64,
    pub created_at: u64,
}

impl NodePayload {
    pub fn root() -> Self {
        NodePayload {
            origin: Origin::Root,
            plan: String::new(),
            code: String::new(),
            execution: String::new(),
            status: Status::Unevaluated,
            val_score: None,
            test_score: None,
            cost: 0,
            created_at: 0,
        }
    }

    pub fn new(origin: Origin, status: Status) -> Self {
        NodePayload {
            origin,
            status,
            ..NodePayload::root()
        }
    }

    pub fn with_scores(mut self, val: Option<f64>, test: Option<f64>) -> Self {
        self.val_score = val;
        self.test_score = test;
        self
    }
}

/// Initial visit count and mean of the root before any child exists.
pub const ROOT_VISITS: u64 = 1;
pub const ROOT_MEAN: f64 = 0.5;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchGraph {
    nodes: Vec<ArtifactNode>,
    edges: Vec<(NodeId, NodeId)>,
    iteration: u64,
}

impl SearchGraph {
    pub fn new() -> Self {
        SearchGraph::default()
    }

    /// A graph holding only the root artifact.
    pub fn with_root() -> Self {
        let mut graph = SearchGraph::new();
        graph
            .add_node(&[], NodePayload::root())
            .expect("root insertion into an empty graph");
        graph
    }

    pub fn root_id(&self) -> NodeId {
        NodeId::ROOT
    }

    pub fn root(&self) -> &ArtifactNode {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of non-root artifacts.
    pub fn artifact_count(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn nodes(&self) -> &[ArtifactNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&ArtifactNode> {
        self.nodes.get(id.0).ok_or(Error::UnknownNode(id))
    }

    pub fn node_mut(&mut self, id: NodeId) -> Result<&mut ArtifactNode> {
        self.nodes.get_mut(id.0).ok_or(Error::UnknownNode(id))
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.0 < self.nodes.len()
    }

    pub fn children(&self, id: NodeId) -> Result<&[NodeId]> {
        Ok(&self.node(id)?.children)
    }

    pub fn valid_nodes(&self) -> impl Iterator<Item = &ArtifactNode> {
        self.nodes.iter().filter(|n| n.is_valid())
    }

    pub fn count_origin(&self, origin: Origin) -> usize {
        self.nodes.iter().filter(|n| n.origin == origin).count()
    }

    /// Inserts a node under `parents` and returns its fresh id.
    ///
    /// The root is created by calling this on an empty graph with no parents.
    pub fn add_node(&mut self, parents: &[NodeId], payload: NodePayload) -> Result<NodeId> {
        let id = NodeId(self.nodes.len());
        if self.nodes.is_empty() {
            if !parents.is_empty() || payload.origin != Origin::Root {
                return Err(Error::InvalidPayload(
                    "the first node must be a parentless root".into(),
                ));
            }
        } else if payload.origin == Origin::Root {
            return Err(Error::InvalidPayload("graph already has a root".into()));
        }

        let expected = payload.origin.arity();
        if parents.len() != expected {
            return Err(Error::Arity {
                kind: payload.origin.as_str(),
                expected,
                got: parents.len(),
            });
        }
        for &p in parents {
            if !self.contains(p) {
                return Err(Error::UnknownNode(p));
            }
        }
        if payload.origin == Origin::Draft && parents[0] != NodeId::ROOT {
            return Err(Error::InvalidPayload("drafts hang off the root".into()));
        }
        if payload.origin == Origin::Crossover && parents[0] == parents[1] {
            return Err(Error::InvalidPayload(
                "crossover needs two distinct parents".into(),
            ));
        }
        match (payload.origin, payload.status) {
            (Origin::Root, Status::Unevaluated) => {}
            (Origin::Root, _) => {
                return Err(Error::InvalidPayload("root is unevaluated".into()));
            }
            (_, Status::Unevaluated) => {
                return Err(Error::InvalidPayload(
                    "operator output must be valid or buggy".into(),
                ));
            }
            _ => {}
        }
        for score in [payload.val_score, payload.test_score]
            .into_iter()
            .flatten()
        {
            if !score.is_finite() {
                return Err(Error::NonFinite(score));
            }
        }

        let (debug_depth, debug_ticks) = if payload.origin == Origin::Debug {
            let parent = &self.nodes[parents[0].0];
            (parent.debug_depth + 1, parent.debug_ticks + payload.cost)
        } else {
            (0, 0)
        };
        let is_root = payload.origin == Origin::Root;
        let node = ArtifactNode {
            id,
            parent_ids: parents.to_vec(),
            children: Vec::new(),
            plan: payload.plan,
            code: payload.code,
            execution: payload.execution,
            status: payload.status,
            val_score: payload.val_score,
            test_score: payload.test_score,
            fitness: None,
            eval_fitness: None,
            visit_count: if is_root { ROOT_VISITS } else { 0 },
            mean_fitness: if is_root { ROOT_MEAN } else { 0.0 },
            origin: payload.origin,
            debug_depth,
            debug_ticks,
            created_at: payload.created_at,
        };
        for &p in parents {
            self.nodes[p.0].children.push(id);
            self.edges.push((p, id));
        }
        self.nodes.push(node);
        if !is_root {
            self.iteration += 1;
        }
        Ok(id)
    }

    /// Path from `id` to the root along first parents; `id` first.
    pub fn lineage(&self, id: NodeId) -> Result<Vec<NodeId>> {
        let mut path = vec![id];
        let mut cur = self.node(id)?;
        while let Some(p) = cur.primary_parent() {
            path.push(p);
            cur = &self.nodes[p.0];
        }
        Ok(path)
    }

    /// Marks a freshly created node as evaluated with the given leaf fitness.
    pub fn evaluate(&mut self, id: NodeId, fitness: f64) -> Result<()> {
        let node = self.node_mut(id)?;
        node.visit_count = 1;
        node.mean_fitness = fitness;
        node.eval_fitness = Some(fitness);
        Ok(())
    }

    /// Stable content hash: ids, parents, status and scores rounded to 12
    /// significant digits, in id order.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for node in &self.nodes {
            let parents: Vec<String> = node.parent_ids.iter().map(|p| p.0.to_string()).collect();
            let line = format!(
                "{}|{}|{}|{}|{}\n",
                node.id.0,
                parents.join(","),
                node.status.as_str(),
                quantize(node.val_score),
                quantize(node.test_score),
            );
            hasher.update(line.as_bytes());
        }
        hex::encode(hasher.finalize())
    }

    /// Rebuilds a graph from exported node records, re-deriving children and edges.
    pub(crate) fn from_nodes(mut nodes: Vec<ArtifactNode>) -> Result<Self> {
        nodes.sort_by_key(|n| n.id);
        let mut graph = SearchGraph::new();
        for (i, node) in nodes.iter().enumerate() {
            if node.id != NodeId(i) {
                return Err(Error::InvalidPayload(format!(
                    "node ids must be dense, found {}",
                    node.id
                )));
            }
            for &p in &node.parent_ids {
                if p >= node.id {
                    return Err(Error::UnknownNode(p));
                }
            }
        }
        for mut node in nodes {
            node.children.clear();
            for &p in &node.parent_ids {
                graph.nodes[p.0].children.push(node.id);
                graph.edges.push((p, node.id));
            }
            if node.origin != Origin::Root {
                graph.iteration += 1;
            }
            graph.nodes.push(node);
        }
        Ok(graph)
    }
}

/// Digest of a graph with no nodes (sha256 of the empty string).
pub const EMPTY_GRAPH_DIGEST: &str =
    "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";

fn quantize(score: Option<f64>) -> String {
    match score {
        // 12 significant digits
        Some(v) => format!("{v:.11e}"),
        None => "-".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    fn valid(origin: Origin, val: f64) -> NodePayload {
        NodePayload::new(origin, Status::Valid).with_scores(Some(val), Some(val))
    }

    #[test]
    fn root_then_draft() {
        let mut g = SearchGraph::new();
        assert_eq!(g.add_node(&[], NodePayload::root()).unwrap(), NodeId(0));
        assert!(g.root().parent_ids.is_empty());
        assert_eq!(g.iteration(), 0);
        let d = g.add_node(&[NodeId(0)], valid(Origin::Draft, 0.4)).unwrap();
        assert_eq!(d, NodeId(1));
        assert_eq!(g.edges(), &[(NodeId(0), NodeId(1))]);
        assert_eq!(g.iteration(), 1);
    }

    #[test]
    fn crossover_gets_two_incoming_edges() {
        let mut g = SearchGraph::with_root();
        let a = g.add_node(&[NodeId(0)], valid(Origin::Draft, 0.4)).unwrap();
        let b = g.add_node(&[NodeId(0)], valid(Origin::Draft, 0.5)).unwrap();
        let c = g.add_node(&[a, b], valid(Origin::Crossover, 0.6)).unwrap();
        assert_eq!(c, NodeId(3));
        let edges: BTreeSet<_> = g.edges().iter().copied().collect();
        let expected: BTreeSet<_> = [(0, 1), (0, 2), (1, 3), (2, 3)]
            .into_iter()
            .map(|(p, c)| (NodeId(p), NodeId(c)))
            .collect();
        assert_eq!(edges, expected);
        assert_eq!(g.lineage(c).unwrap(), vec![NodeId(3), NodeId(1), NodeId(0)]);
    }

    #[test]
    fn rejects_unknown_parent_and_bad_arity() {
        let mut g = SearchGraph::with_root();
        assert!(matches!(
            g.add_node(&[NodeId(4)], valid(Origin::Improve, 0.1)),
            Err(Error::UnknownNode(NodeId(4)))
        ));
        assert!(matches!(
            g.add_node(&[NodeId(0)], valid(Origin::Crossover, 0.1)),
            Err(Error::Arity { expected: 2, .. })
        ));
        assert!(g
            .add_node(
                &[NodeId(0)],
                NodePayload::new(Origin::Draft, Status::Unevaluated)
            )
            .is_err());
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn lineage_of_chain() {
        let mut g = SearchGraph::with_root();
        assert_eq!(g.lineage(NodeId(0)).unwrap(), vec![NodeId(0)]);
        let a = g.add_node(&[NodeId(0)], valid(Origin::Draft, 0.2)).unwrap();
        let b = g.add_node(&[a], valid(Origin::Improve, 0.3)).unwrap();
        assert_eq!(g.lineage(b).unwrap(), vec![NodeId(2), NodeId(1), NodeId(0)]);
        assert!(g.lineage(NodeId(9)).is_err());
    }

    #[test]
    fn debug_depth_counts_contiguous_chain() {
        let mut g = SearchGraph::with_root();
        let d = g
            .add_node(&[NodeId(0)], NodePayload::new(Origin::Draft, Status::Buggy))
            .unwrap();
        let mut cur = d;
        for depth in 1..=3 {
            let mut p = NodePayload::new(Origin::Debug, Status::Buggy);
            p.cost = 2;
            cur = g.add_node(&[cur], p).unwrap();
            assert_eq!(g.node(cur).unwrap().debug_depth, depth);
            assert_eq!(g.node(cur).unwrap().debug_ticks, 2 * depth as u64);
        }
        let fixed = g.add_node(&[cur], valid(Origin::Debug, 0.5)).unwrap();
        let improved = g.add_node(&[fixed], valid(Origin::Improve, 0.6)).unwrap();
        assert_eq!(g.node(fixed).unwrap().debug_depth, 4);
        assert_eq!(g.node(improved).unwrap().debug_depth, 0);
    }

    #[test]
    fn digest_constants_and_sensitivity() {
        assert_eq!(SearchGraph::new().digest(), EMPTY_GRAPH_DIGEST);
        let mut g = SearchGraph::with_root();
        g.add_node(&[NodeId(0)], valid(Origin::Draft, 0.25))
            .unwrap();
        let before = g.digest();
        g.nodes[1].status = Status::Buggy;
        assert_ne!(before, g.digest());
        g.nodes[1].status = Status::Valid;
        assert_eq!(before, g.digest());
        // differences below 12 significant digits are quantized away
        g.nodes[1].val_score = Some(0.25 + 1e-15);
        assert_eq!(before, g.digest());
    }
}
