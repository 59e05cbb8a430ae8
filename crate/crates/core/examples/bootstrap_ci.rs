//! Success rates pooled over tasks, with a percentile interval from a
//! bootstrap that resamples replicates within each task.

use agent_search::stats::{pooled_rate, stratified_bootstrap_ci};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // three tasks, different numbers of replicates
    let outcomes = vec![
        vec![true, true, false, true, false, true, true, true],
        vec![false, false, true, false, false],
        vec![
            true, false, false, true, true, false, true, false, false, true,
        ],
    ];
    let ci = stratified_bootstrap_ci(&outcomes, 5000, 0.95, 1)?;
    println!("pooled rate {:.3}", pooled_rate(&outcomes));
    println!(
        "95% interval [{:.3}, {:.3}] (width {:.3})",
        ci.lo,
        ci.hi,
        ci.width()
    );
    assert!(ci.contains(ci.estimate));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
