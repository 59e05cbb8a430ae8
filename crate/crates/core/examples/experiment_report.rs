//! A small experiment described in TOML: two policies on two simulated tasks,
//! aggregated with stratified bootstrap intervals and written out as CSV.

use agent_search::config::parse_experiment;
use agent_search::experiment::run_experiment;
use agent_search::report::{import_report, render_summary};

const EXPERIMENT: &str = r#"
[experiment]
name = "policies"
seed = 17
replicates = 8
parallelism = 2

[analysis]
bootstrap_resamples = 1000
max_k = 10

[defaults]
budgets = { max_nodes = 30 }

[[configs]]
name = "greedy"

[[configs]]
name = "mcts"
policy = "mcts"

[[tasks]]
kind = "sim"
name = "easy"
success_threshold = 0.68

[[tasks]]
kind = "sim"
name = "hard"
success_threshold = 0.8
bug_prob = 0.35
"#;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut spec = parse_experiment(EXPERIMENT)?;
    spec.output_dir = Some(dir.path().to_path_buf());

    let (report, records) = run_experiment(&spec)?;
    println!("{} runs", records.len());
    print!("{}", render_summary(&report));
    for row in &report.tasks {
        println!(
            "  {:<7} {:<5} {}/{}",
            row.config, row.task, row.successes, row.runs
        );
    }

    let mut files: Vec<String> = walk(dir.path());
    files.sort();
    println!("wrote {files:?}");
    let back = import_report(&report.name, dir.path())?;
    assert_eq!(back.configs, report.configs);
    Ok(())
}

fn walk(dir: &std::path::Path) -> Vec<String> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).into_iter().flatten().flatten() {
        let path = entry.path();
        if path.is_dir() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if name == "graphs" {
                out.push("graphs/...".into());
            } else {
                out.extend(walk(&path).into_iter().map(|f| format!("{name}/{f}")));
            }
        } else {
            out.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    out
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
