//! Greedy search with the AIDE operator set on a simulated task.
//!
//! Five drafts hang off the root, then every step improves the node with the
//! best validation score (or debugs a buggy leaf).

use agent_search::operators::OperatorSet;
use agent_search::search::{run_search, PolicyConfig};
use agent_search::sim::{SimEnvironment, SimTask};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let task = SimTask {
        name: "tabular".into(),
        ..SimTask::default()
    };
    let cfg = PolicyConfig::greedy(OperatorSet::Aide)
        .with_seed(3)
        .with_max_nodes(25);
    let result = run_search(cfg, task.metric(), SimEnvironment::new(task, 3))?;

    for node in result.graph.nodes().iter().skip(1) {
        let parent = node.parent_ids.first().map_or(0, |p| p.0);
        let val = node
            .val_score
            .map_or("bug".to_string(), |v| format!("val {v:.3}"));
        println!(
            "{:>3} <- {:<3} {:<9} {val}",
            node.id.0,
            parent,
            node.origin.as_str()
        );
    }
    println!(
        "final node {:?}: val {:.3}, test {:.3}, success {}",
        result.final_node.map(|n| n.0),
        result.final_val.unwrap_or(f64::NAN),
        result.final_test.unwrap_or(f64::NAN),
        result.success
    );
    assert_eq!(result.graph.artifact_count(), 25);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
