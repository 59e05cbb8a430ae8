//! Search-graph export: line-delimited JSON node records and Graphviz DOT.
//!
//! Each JSONL line is one node. The DOT rendering labels nodes with their
//! test score and shades them by validation score; buggy nodes are red and
//! the second parent of a crossover is drawn dashed.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ArtifactNode, NodeId, Origin, SearchGraph, Status};

pub const NODE_SCHEMA: &str = "agent-search/node/v1";

/// One exported node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub schema: String,
    pub id: usize,
    pub parents: Vec<usize>,
    pub operator: Origin,
    pub status: Status,
    pub val_score: Option<f64>,
    pub test_score: Option<f64>,
    pub fitness: Option<f64>,
    pub n: u64,
    pub q: f64,
    pub debug_depth: u32,
    pub created_at: u64,
    pub plan: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
}

impl NodeRecord {
    pub fn from_node(node: &ArtifactNode, with_code: bool) -> Self {
        NodeRecord {
            schema: NODE_SCHEMA.to_string(),
            id: node.id.0,
            parents: node.parent_ids.iter().map(|p| p.0).collect(),
            operator: node.origin,
            status: node.status,
            val_score: node.val_score,
            test_score: node.test_score,
            fitness: node.fitness,
            n: node.visit_count,
            q: node.mean_fitness,
            debug_depth: node.debug_depth,
            created_at: node.created_at,
            plan: node.plan.clone(),
            code: with_code.then(|| node.code.clone()),
        }
    }

    fn into_node(self) -> ArtifactNode {
        ArtifactNode {
            id: NodeId(self.id),
            parent_ids: self.parents.into_iter().map(NodeId).collect(),
            children: Vec::new(),
            plan: self.plan,
            code: self.code.unwrap_or_default(),
            execution: String::new(),
            status: self.status,
            val_score: self.val_score,
            test_score: self.test_score,
            fitness: self.fitness,
            eval_fitness: None,
            visit_count: self.n,
            mean_fitness: self.q,
            origin: self.operator,
            debug_depth: self.debug_depth,
            debug_ticks: 0,
            created_at: self.created_at,
        }
    }
}

pub fn write_jsonl<W: Write>(graph: &SearchGraph, with_code: bool, mut out: W) -> Result<()> {
    for node in graph.nodes() {
        serde_json::to_writer(&mut out, &NodeRecord::from_node(node, with_code))?;
        out.write_all(b"\n").map_err(|e| Error::io("<jsonl>", e))?;
    }
    Ok(())
}

pub fn to_jsonl(graph: &SearchGraph, with_code: bool) -> String {
    let mut buf = Vec::new();
    write_jsonl(graph, with_code, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// Rebuilds a graph from JSONL records. Execution logs and debug tick
/// counts are not part of the export and come back empty.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<SearchGraph> {
    let mut nodes = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<jsonl>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: NodeRecord = serde_json::from_str(&line)?;
        if record.schema != NODE_SCHEMA {
            return Err(Error::InvalidPayload(format!(
                "line {}: unexpected schema `{}`",
                i + 1,
                record.schema
            )));
        }
        nodes.push(record.into_node());
    }
    SearchGraph::from_nodes(nodes)
}

fn ramp(t: f64) -> String {
    // pale yellow to dark green
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(255.0, 0.0),
        lerp(247.0, 104.0),
        lerp(188.0, 55.0)
    )
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering of a search graph.
pub fn to_dot(graph: &SearchGraph) -> String {
    let vals: Vec<f64> = graph.valid_nodes().filter_map(|n| n.val_score).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out =
        String::from("digraph search {\n  node [style=filled, fontname=\"Helvetica\"];\n");
    for node in graph.nodes() {
        let (label, color) = match node.status {
            Status::Unevaluated => ("root".to_string(), "#d9d9d9".to_string()),
            Status::Buggy => ("bug".to_string(), "#e41a1c".to_string()),
            Status::Valid => {
                let label = node
                    .test_score
                    .or(node.val_score)
                    .map_or("?".to_string(), |s| format!("{s:.3}"));
                let shade = match node.val_score {
                    Some(v) if hi > lo => (v - lo) / (hi - lo),
                    _ => 0.5,
                };
                (label, ramp(shade))
            }
        };
        let val = node
            .val_score
            .map_or("none".to_string(), |v| format!("{v:.4}"));
        let tooltip = format!("{} {} val={val}", node.origin.as_str(), node.id.0);
        let _ = writeln!(
            out,
            "  n{} [label=\"{}\", fillcolor=\"{}\", tooltip=\"{}\"];",
            node.id.0,
            escape(&label),
            color,
            escape(&tooltip)
        );
    }
    for node in graph.nodes() {
        for (i, p) in node.parent_ids.iter().enumerate() {
            let style = if i > 0 { " [style=dashed]" } else { "" };
            let _ = writeln!(out, "  n{} -> n{}{};", p.0, node.id.0, style);
        }
    }
    out.push_str("}\n");
    out
}
