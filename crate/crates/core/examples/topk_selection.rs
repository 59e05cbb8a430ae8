use agent_search::search::{run_search, topk_selection_score, PolicyConfig, TopKStrategy};
use agent_search::sim::{SimEnvironment, SimTask};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Best test score among the k highest-validation nodes of one finished
/// graph, next to the average over random k-subsets.
pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let task = SimTask {
        val_noise_sigma: 0.08,
        ..SimTask::default()
    };
    let metric = task.metric();
    let result = run_search(
        PolicyConfig::default().with_seed(2).with_max_nodes(40),
        metric.clone(),
        SimEnvironment::new(task, 2),
    )?;
    let graph = &result.graph;
    let valid = graph.valid_nodes().count();
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    println!("{valid} valid nodes");
    println!("{:>3} {:>9} {:>9}", "k", "top-k", "random-k");
    let mut prev = f64::NEG_INFINITY;
    for k in [1, 2, 3, 5, 8, 13, 21, valid] {
        let top = topk_selection_score(graph, k, TopKStrategy::TopKByVal, &metric, &mut rng)?;
        let random = (0..200)
            .map(|_| topk_selection_score(graph, k, TopKStrategy::RandomK, &metric, &mut rng))
            .sum::<Result<f64, _>>()?
            / 200.0;
        println!("{k:>3} {top:>9.4} {random:>9.4}");
        assert!(top >= prev);
        prev = top;
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
