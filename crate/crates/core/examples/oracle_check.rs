use agent_search::operators::OperatorSet;
use agent_search::search::{PolicyConfig, PolicyKind, Search};
use agent_search::sim::{oracle_best_reachable, OracleRules, SimEnvironment, SimTask};

/// On a tiny budget the best reachable latent quality can be enumerated
/// exactly; no policy may beat it.
pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let task = SimTask::default();
    let (budget, world) = (8, 99);
    let rules = OracleRules {
        operator_set: OperatorSet::Aide,
        ..OracleRules::default()
    };
    let bound = oracle_best_reachable(&task, budget, world, &rules)?.expect("root has a valid descendant");
    println!("oracle: {bound:.4}");

    for policy in [
        PolicyKind::Greedy,
        PolicyKind::Mcts,
        PolicyKind::Evolutionary,
    ] {
        let mut cfg = PolicyConfig {
            policy,
            operator_set: OperatorSet::Aide,
            ..PolicyConfig::default()
        }
        .with_max_nodes(budget);
        cfg.evo.population_size = 4;
        cfg.evo.candidates_per_generation = 2;
        let mut search = Search::new(cfg, task.metric(), SimEnvironment::new(task.clone(), world))?;
        search.run()?;
        let (_, env) = search.into_parts()?;
        let best = env.best_latent_quality().unwrap_or(f64::NEG_INFINITY);
        println!("{policy:?}: {best:.4}");
        assert!(best <= bound);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
