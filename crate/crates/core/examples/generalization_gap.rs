//! Compares the three oracle modes on the same simulated worlds.
//!
//! Val/Val searches and selects on the noisy validation score, Val/Test picks
//! the final node of that same graph by test score, Test/Test lets the test
//! score guide the whole search. The spread between them is the gap an honest
//! agent cannot see.

use agent_search::search::{run_search, select_final, OracleMode, PolicyConfig};
use agent_search::sim::{SimEnvironment, SimTask};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let task = SimTask {
        val_noise_sigma: 0.08,
        success_threshold: 0.74,
        ..SimTask::default()
    };
    let metric = task.metric();
    let runs = 60;
    let mut wins = [0usize; 3];
    for seed in 0..runs {
        let cfg = PolicyConfig::default().with_seed(seed).with_max_nodes(40);
        let honest = run_search(cfg, metric.clone(), SimEnvironment::new(task.clone(), seed))?;
        wins[0] += honest.success as usize;
        let by_test = select_final(&honest.graph, OracleMode::ValTest, &metric)?;
        let test = honest
            .graph
            .node(by_test)?
            .test_score
            .unwrap_or(f64::NEG_INFINITY);
        wins[1] += metric.meets_threshold(test) as usize;
        let guided = cfg.with_oracle_mode(OracleMode::TestTest);
        wins[2] += run_search(
            guided,
            metric.clone(),
            SimEnvironment::new(task.clone(), seed),
        )?
        .success as usize;
    }
    for (mode, w) in OracleMode::ALL.iter().zip(wins) {
        println!(
            "{:<10} {:>5.1}%",
            mode.as_str(),
            100.0 * w as f64 / runs as f64
        );
    }
    assert!(wins[0] <= wins[1]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
