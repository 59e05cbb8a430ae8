//! The full language-model loop with offline stand-ins: the mock client
//! writes plans and scripts, the mock executor "runs" them and the analysis
//! step turns the output into a verdict. Swap in `HttpClient` (feature
//! `http`) and `CommandExecutor` for real runs.

use agent_search::fitness::MetricSpec;
use agent_search::llm::{LiveEnvironment, MockClient, MockExecutor, TaskBinding};
use agent_search::search::{run_search, PolicyConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let binding = TaskBinding {
        task_desc: "Classify iris flowers by species.".into(),
        data_overview: "iris.csv (150 rows, 5 columns)".into(),
        ..TaskBinding::default()
    };
    let env = LiveEnvironment::new(MockClient::new(9), MockExecutor, binding);
    let cfg = PolicyConfig::default().with_max_nodes(12);
    let result = run_search(cfg, MetricSpec::maximize("accuracy"), env)?;

    for node in result.graph.nodes().iter().skip(1) {
        let idea = node
            .plan
            .lines()
            .find(|l| !l.starts_with('#'))
            .unwrap_or("");
        println!(
            "{:>2} {:<9} {:<6} {}",
            node.id.0,
            node.origin.as_str(),
            node.status.as_str(),
            idea
        );
    }
    let best = result.final_node.expect("some node is valid");
    println!(
        "\nselected node {}:\n{}",
        best.0,
        result.graph.node(best)?.code
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
