use agent_search::export::{read_jsonl, to_dot, to_jsonl};
use agent_search::search::{run_search, PolicyConfig};
use agent_search::sim::{SimEnvironment, SimTask};

/// Exports an evolutionary search graph as JSONL and Graphviz DOT. Pipe the
/// DOT text into `dot -Tsvg` to draw it: shading follows validation score,
/// buggy nodes are red and crossover's second parent is dashed.
pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let task = SimTask::default();
    let result = run_search(
        PolicyConfig::evolutionary().with_seed(4).with_max_nodes(18),
        task.metric(),
        SimEnvironment::new(task, 4),
    )?;

    let jsonl = to_jsonl(&result.graph, false);
    println!("{}", jsonl.lines().nth(1).unwrap_or_default());
    let back = read_jsonl(jsonl.as_bytes())?;
    assert_eq!(back.digest(), result.graph.digest());

    let dot = to_dot(&back);
    print!("{dot}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
