//! Success rates and stratified bootstrap confidence intervals.
//!
//! Strata are tasks: every resample draws each task's replicates with
//! replacement, keeping the per-task sample sizes, and recomputes the pooled
//! mean.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest resample count accepted.
pub const MIN_RESAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Pooled mean over every observation of every stratum.
pub fn pooled_mean(strata: &[Vec<f64>]) -> f64 {
    let n: usize = strata.iter().map(Vec::len).sum();
    if n == 0 {
        return f64::NAN;
    }
    strata.iter().flatten().sum::<f64>() / n as f64
}

pub fn pooled_rate(outcomes: &[Vec<bool>]) -> f64 {
    pooled_mean(&as_f64(outcomes))
}

fn as_f64(outcomes: &[Vec<bool>]) -> Vec<Vec<f64>> {
    outcomes
        .iter()
        .map(|s| s.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Linear-interpolation sample quantile of sorted data (Hyndman-Fan type 7).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile interval for the pooled mean of real-valued observations.
pub fn stratified_bootstrap(
    strata: &[Vec<f64>],
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<Interval> {
    if strata.is_empty() {
        return Err(Error::InvalidArgument("no strata".into()));
    }
    if let Some(i) = strata.iter().position(Vec::is_empty) {
        return Err(Error::InvalidArgument(format!("stratum {i} is empty")));
    }
    if resamples < MIN_RESAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_RESAMPLES} resamples, got {resamples}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "level must be in (0, 1), got {level}"
        )));
    }
    let total: usize = strata.iter().map(Vec::len).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut sum = 0.0;
        for s in strata {
            for _ in 0..s.len() {
                sum += s[rng.random_range(0..s.len())];
            }
        }
        stats.push(sum / total as f64);
    }
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(Interval {
        estimate: pooled_mean(strata),
        lo: quantile(&stats, alpha),
        hi: quantile(&stats, 1.0 - alpha),
    })
}

/// Percentile interval for a pooled success rate.
pub fn stratified_bootstrap_ci(
    outcomes: &[Vec<bool>],
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<Interval> {
    stratified_bootstrap(&as_f64(outcomes), resamples, level, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_outcomes() {
        let ci = stratified_bootstrap_ci(&[vec![true; 7], vec![true; 3]], 1000, 0.95, 1).unwrap();
        assert_eq!((ci.lo, ci.estimate, ci.hi), (1.0, 1.0, 1.0));
    }

    #[test]
    fn two_point_sample() {
        // resample means are 0, 0.5, 1 with probabilities 1/4, 1/2, 1/4
        let ci = stratified_bootstrap_ci(&[vec![true, false]], 10_000, 0.95, 2).unwrap();
        assert_eq!((ci.lo, ci.hi), (0.0, 1.0));
        assert!(ci.contains(0.5));
    }

    #[test]
    fn opposite_strata_pin_the_pooled_rate() {
        let ci = stratified_bootstrap_ci(&[vec![true; 5], vec![false; 5]], 2000, 0.95, 3).unwrap();
        assert_eq!(ci.estimate, 0.5);
        assert_eq!((ci.lo, ci.hi), (0.5, 0.5));
    }

    #[test]
    fn rejections() {
        assert!(stratified_bootstrap_ci(&[vec![true], vec![]], 1000, 0.95, 0).is_err());
        assert!(stratified_bootstrap_ci(&[vec![true]], 999, 0.95, 0).is_err());
        assert!(stratified_bootstrap_ci(&[vec![true]], 1000, 1.0, 0).is_err());
        assert!(stratified_bootstrap_ci(&[], 1000, 0.95, 0).is_err());
    }

    #[test]
    fn quantile_type7() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert!((quantile(&xs, 0.5) - 2.5).abs() < 1e-12);
        assert!((quantile(&xs, 0.25) - 1.75).abs() < 1e-12);
    }

    #[test]
    fn pooled_rate_weights_by_replicates() {
        let outcomes = vec![vec![true, true, false, false], vec![true]];
        assert!((pooled_rate(&outcomes) - 0.6).abs() < 1e-12);
    }
}
