use agent_search::search::{PolicyConfig, Search};
use agent_search::sim::{SimEnvironment, SimTask};

/// Runs MCTS and prints the visit count and mean fitness of each child of
/// the root, i.e. the statistics UCT descent trades off.
pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let task = SimTask::default();
    let mut cfg = PolicyConfig::mcts().with_seed(11).with_max_nodes(60);
    cfg.mcts.uct_c = 0.25;
    cfg.mcts.num_children = 3;

    let mut search = Search::new(cfg, task.metric(), SimEnvironment::new(task, 11))?;
    search.run()?;
    let graph = search.graph();
    let root = graph.root();
    println!(
        "root: N = {}, Q = {:.4}",
        root.visit_count, root.mean_fitness
    );
    for &child in &root.children {
        let c = graph.node(child)?;
        println!(
            "  draft {:>2}: N = {:>3}, Q = {:.4}, {}",
            c.id.0,
            c.visit_count,
            c.mean_fitness,
            c.status.as_str()
        );
    }
    // the root counts its own initial visit plus one per artifact
    assert_eq!(root.visit_count as usize, graph.len());
    let result = search.result()?;
    println!(
        "best by validation: {:?} (test {:.3})",
        result.final_node.map(|n| n.0),
        result.final_test.unwrap_or(f64::NAN)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
