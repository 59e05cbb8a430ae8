//! Evolutionary search with generation tracing: each replacement step lists
//! which members left the population and which offspring joined.

use agent_search::search::{PolicyConfig, Search};
use agent_search::sim::{SimEnvironment, SimTask};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let task = SimTask::default();
    let mut cfg = PolicyConfig::evolutionary().with_seed(5).with_max_nodes(60);
    cfg.evo.population_size = 6;
    cfg.evo.candidates_per_generation = 3;
    cfg.evo.improve_probability = 0.5;

    let mut search = Search::new(cfg, task.metric(), SimEnvironment::new(task, 5))?;
    search.trace_generations();
    search.run()?;

    for record in search.generation_trace() {
        let ids = |m: &[agent_search::policy::Member]| m.iter().map(|m| m.id.0).collect::<Vec<_>>();
        let gone: Vec<usize> = record
            .before
            .iter()
            .filter(|m| !record.after.iter().any(|a| a.id == m.id))
            .map(|m| m.id.0)
            .collect();
        println!(
            "generation {:>2}: evicted {:?}, added {:?}",
            record.generation,
            gone,
            ids(&record.offspring)
        );
        assert_eq!(record.after.len(), 6);
    }
    let pop = search.population().expect("evolutionary state");
    let best = pop.members.iter().map(|m| m.fitness).fold(0.0, f64::max);
    println!(
        "final population {:?}, best fitness {best:.3}",
        pop.ids().iter().map(|i| i.0).collect::<Vec<_>>()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
