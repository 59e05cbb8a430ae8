//! Pause a run, write a checkpoint, resume it in a fresh process-like setting
//! and check that the finished graph is identical to an uninterrupted run.

use agent_search::search::{PolicyConfig, Search};
use agent_search::sim::{SimEnvironment, SimTask};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let task = SimTask::default();
    let cfg = PolicyConfig::mcts().with_seed(21).with_max_nodes(80);
    let fresh = || SimEnvironment::new(task.clone(), 21);

    let mut straight = Search::new(cfg, task.metric(), fresh())?;
    straight.run()?;
    let expected = straight.graph().digest();

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("run.ckpt");
    let mut first = Search::new(cfg, task.metric(), fresh())?;
    first.run_until_tick(30)?;
    first.checkpoint(&path)?;
    println!(
        "paused at tick {} with {} nodes",
        first.ticks(),
        first.graph().artifact_count()
    );
    drop(first);

    // the simulator state comes back from the checkpoint, so any instance will do
    let mut resumed = Search::resume_from(&path, SimEnvironment::new(SimTask::default(), 0))?;
    resumed.run()?;
    println!(
        "resumed to tick {}; digest {}",
        resumed.ticks(),
        &resumed.graph().digest()[..16]
    );
    assert_eq!(resumed.graph().digest(), expected);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
