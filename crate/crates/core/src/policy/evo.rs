use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvoConfig {
    pub population_size: usize,
    /// Offspring produced per generation.
    pub candidates_per_generation: usize,
    /// Probability of reproducing with Improve rather than Crossover.
    pub improve_probability: f64,
}

impl Default for EvoConfig {
    fn default() -> Self {
        EvoConfig {
            population_size: 10,
            candidates_per_generation: 5,
            improve_probability: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub id: NodeId,
    pub fitness: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub members: Vec<Member>,
}

impl Population {
    pub fn new(members: Vec<Member>) -> Self {
        Population { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn ids(&self) -> Vec<NodeId> {
        self.members.iter().map(|m| m.id).collect()
    }
}

fn proportional_index<R: Rng + ?Sized>(members: &[Member], rng: &mut R) -> usize {
    let total: f64 = members.iter().map(|m| m.fitness.max(0.0)).sum();
    if total <= 0.0 {
        return rng.random_range(0..members.len());
    }
    let mut target = rng.random::<f64>() * total;
    for (i, m) in members.iter().enumerate() {
        let w = m.fitness.max(0.0);
        if target < w {
            return i;
        }
        target -= w;
    }
    // rounding left a sliver past the end; take the last positive weight
    members
        .iter()
        .rposition(|m| m.fitness > 0.0)
        .unwrap_or(members.len() - 1)
}

/// Fitness-proportional draw; uniform when every member has zero fitness.
pub fn evo_select_parent<R: Rng + ?Sized>(population: &Population, rng: &mut R) -> Result<NodeId> {
    if population.is_empty() {
        return Err(Error::NoCandidate);
    }
    Ok(population.members[proportional_index(&population.members, rng)].id)
}

/// Two proportional draws without replacement.
pub fn evo_select_pair<R: Rng + ?Sized>(
    population: &Population,
    rng: &mut R,
) -> Result<(NodeId, NodeId)> {
    if population.len() < 2 {
        return Err(Error::NoCandidate);
    }
    let mut rest = population.members.clone();
    let first = rest.remove(proportional_index(&rest, rng));
    let second = rest[proportional_index(&rest, rng)];
    Ok((first.id, second.id))
}

/// Offspring unconditionally replace the least-fit members; ties evict the
/// oldest (lowest id) first.
pub fn evo_replace(population: &Population, offspring: &[Member]) -> Result<Population> {
    if offspring.len() > population.len() {
        return Err(Error::InvalidArgument(format!(
            "{} offspring exceed a population of {}",
            offspring.len(),
            population.len()
        )));
    }
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| {
        let (ma, mb) = (&population.members[a], &population.members[b]);
        ma.fitness.total_cmp(&mb.fitness).then(ma.id.cmp(&mb.id))
    });
    let mut evicted = vec![false; population.len()];
    for &i in order.iter().take(offspring.len()) {
        evicted[i] = true;
    }
    let mut members: Vec<Member> = population
        .members
        .iter()
        .zip(&evicted)
        .filter(|(_, &e)| !e)
        .map(|(m, _)| *m)
        .collect();
    members.extend_from_slice(offspring);
    Ok(Population { members })
}
