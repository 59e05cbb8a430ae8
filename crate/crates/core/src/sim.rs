//! Deterministic synthetic task environment.
//!
//! Each node carries a hidden latent quality `q`. Observed scores are
//! `q + noise`, drawn once per node, with independent validation and test
//! noise so that selecting on validation overfits in the way real searches
//! do. All randomness for a node comes from a stream keyed on the node's
//! identity (operator, parents, position among its parent's children), so the
//! same node gets the same draws no matter which policy reached it. That is
//! what makes [`oracle_best_reachable`] comparable to any policy run on the
//! same seed.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, Outcome};
use crate::error::{Error, Result};
use crate::fitness::{Direction, MetricSpec};
use crate::graph::{SearchGraph, Status};
use crate::operators::{
    complexity_cue, ComplexityCue, DebugBudget, OperatorCall, OperatorKind, OperatorSet, TickCosts,
};

/// Uniform distribution on `[low, high]`; a point mass when they coincide.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformRange {
    pub low: f64,
    pub high: f64,
}

impl UniformRange {
    pub fn new(low: f64, high: f64) -> Self {
        UniformRange { low, high }
    }

    pub fn point(v: f64) -> Self {
        UniformRange { low: v, high: v }
    }

    /// `mean ± spread`.
    pub fn centered(mean: f64, spread: f64) -> Self {
        UniformRange {
            low: mean - spread,
            high: mean + spread,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.high > self.low {
            rng.random_range(self.low..=self.high)
        } else {
            self.low
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.low.is_finite() && self.high.is_finite()) || self.low > self.high {
            return Err(Error::Config(format!(
                "{what}: invalid range [{}, {}]",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

/// Improve deltas per complexity cue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CueTable {
    pub minimal: UniformRange,
    pub moderate: UniformRange,
    pub advanced: UniformRange,
}

impl CueTable {
    pub fn uniform(range: UniformRange) -> Self {
        CueTable {
            minimal: range,
            moderate: range,
            advanced: range,
        }
    }

    /// Deltas for a cue; uncued (AIDE) improvements use the moderate entry.
    pub fn get(&self, cue: Option<ComplexityCue>) -> UniformRange {
        match cue {
            Some(ComplexityCue::Minimal) => self.minimal,
            Some(ComplexityCue::Advanced) => self.advanced,
            Some(ComplexityCue::Moderate) | None => self.moderate,
        }
    }

    fn max_high(&self) -> f64 {
        self.minimal
            .high
            .max(self.moderate.high)
            .max(self.advanced.high)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimTask {
    pub name: String,
    pub direction: Direction,
    pub quality_ceiling: f64,
    pub draft_quality: UniformRange,
    pub improve_delta: CueTable,
    pub crossover_bonus: UniformRange,
    /// Probability that a Draft/Improve/Crossover output is buggy.
    pub bug_prob: f64,
    pub debug_fix_prob: f64,
    pub val_noise_sigma: f64,
    pub test_noise_sigma: f64,
    /// Raw-units test score defining a success.
    pub success_threshold: f64,
}

impl Default for SimTask {
    fn default() -> Self {
        SimTask {
            name: "sim".to_string(),
            direction: Direction::Maximize,
            quality_ceiling: 1.0,
            draft_quality: UniformRange::new(0.3, 0.6),
            improve_delta: CueTable {
                minimal: UniformRange::centered(0.01, 0.03),
                moderate: UniformRange::centered(0.02, 0.06),
                advanced: UniformRange::centered(0.03, 0.12),
            },
            crossover_bonus: UniformRange::centered(0.01, 0.04),
            bug_prob: 0.2,
            debug_fix_prob: 0.6,
            val_noise_sigma: 0.05,
            test_noise_sigma: 0.02,
            success_threshold: 0.75,
        }
    }
}

impl SimTask {
    pub fn metric(&self) -> MetricSpec {
        MetricSpec {
            name: format!("{}-score", self.name),
            direction: self.direction,
            success_threshold: Some(self.success_threshold),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, p) in [
            ("bug_prob", self.bug_prob),
            ("debug_fix_prob", self.debug_fix_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!(
                    "{what} must be a probability, got {p}"
                )));
            }
        }
        for (what, s) in [
            ("val_noise_sigma", self.val_noise_sigma),
            ("test_noise_sigma", self.test_noise_sigma),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Config(format!("{what} must be >= 0, got {s}")));
            }
        }
        if !self.quality_ceiling.is_finite() || !self.success_threshold.is_finite() {
            return Err(Error::Config("ceiling and threshold must be finite".into()));
        }
        self.draft_quality.validate("draft_quality")?;
        self.improve_delta
            .minimal
            .validate("improve_delta.minimal")?;
        self.improve_delta
            .moderate
            .validate("improve_delta.moderate")?;
        self.improve_delta
            .advanced
            .validate("improve_delta.advanced")?;
        self.crossover_bonus.validate("crossover_bonus")?;
        Ok(())
    }

    fn to_raw(&self, oriented: f64) -> f64 {
        match self.direction {
            Direction::Maximize => oriented,
            Direction::Minimize => -oriented,
        }
    }
}

/// Hidden per-node simulator state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimNodeState {
    pub key: u64,
    pub status: Status,
    pub latent_quality: f64,
    /// Raw units.
    pub observed_val: Option<f64>,
    /// Raw units; never shown to selection outside oracle modes.
    pub observed_test: Option<f64>,
}

impl SimNodeState {
    pub fn root(world_seed: u64) -> Self {
        SimNodeState {
            key: mix(world_seed ^ 0x524f_4f54),
            status: Status::Unevaluated,
            latent_quality: 0.0,
            observed_val: None,
            observed_test: None,
        }
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Identity of a node for random-stream derivation.
pub fn node_key(kind: OperatorKind, parent_keys: &[u64], ordinal: usize) -> u64 {
    let mut h = mix(kind as u64 + 1);
    for &k in parent_keys {
        h = mix(h ^ k);
    }
    mix(h ^ (ordinal as u64).wrapping_mul(0x2545_f491_4f6c_dd1d))
}

/// The numeric part of one simulated operator application.
fn draw<R: Rng + ?Sized>(
    task: &SimTask,
    kind: OperatorKind,
    cue: Option<ComplexityCue>,
    parents: &[&SimNodeState],
    rng: &mut R,
) -> (f64, Status, Option<f64>, Option<f64>) {
    let q = match kind {
        OperatorKind::Draft => task.draft_quality.sample(rng),
        OperatorKind::Improve => {
            parents[0].latent_quality + task.improve_delta.get(cue).sample(rng)
        }
        OperatorKind::Crossover => {
            parents[0].latent_quality.max(parents[1].latent_quality)
                + task.crossover_bonus.sample(rng)
        }
        OperatorKind::Debug | OperatorKind::Memory => parents[0].latent_quality,
    }
    .min(task.quality_ceiling);
    let u: f64 = rng.random();
    let status = if kind == OperatorKind::Debug {
        if u < task.debug_fix_prob {
            Status::Valid
        } else {
            Status::Buggy
        }
    } else if u < task.bug_prob {
        Status::Buggy
    } else {
        Status::Valid
    };
    let z_val: f64 = rng.sample(StandardNormal);
    let z_test: f64 = rng.sample(StandardNormal);
    if status == Status::Valid {
        let val = task.to_raw(q + task.val_noise_sigma * z_val);
        let test = task.to_raw(q + task.test_noise_sigma * z_test);
        (q, status, Some(val), Some(test))
    } else {
        (q, status, None, None)
    }
}

/// Simulated output of one operator application.
#[derive(Clone, Debug, PartialEq)]
pub struct SimOutcome {
    pub state: SimNodeState,
    pub plan: String,
    pub code: String,
    pub execution: String,
}

/// Applies `call` to the given parent states. The returned state's `key` is
/// left at zero; [`SimEnvironment`] fills it in.
pub fn sim_apply<R: Rng + ?Sized>(
    task: &SimTask,
    call: &OperatorCall,
    parents: &[&SimNodeState],
    rng: &mut R,
) -> Result<SimOutcome> {
    let expected = call.kind.arity();
    if call.kind == OperatorKind::Memory
        || parents.len() != expected
        || call.targets.len() != expected
    {
        return Err(Error::Arity {
            kind: call.kind.as_str(),
            expected,
            got: parents.len(),
        });
    }
    let (q, status, val, test) = draw(task, call.kind, call.complexity, parents, rng);
    let cue = call
        .complexity
        .map(|c| format!(" ({c:?} complexity)").to_lowercase())
        .unwrap_or_default();
    let lineage: Vec<String> = call.targets.iter().map(|t| t.0.to_string()).collect();
    let plan = match call.kind {
        OperatorKind::Draft => format!("Draft a new solution{cue}."),
        OperatorKind::Improve => format!("Improve solution {}{cue}.", lineage[0]),
        OperatorKind::Crossover => format!("Combine solutions {} and {}.", lineage[0], lineage[1]),
        _ => format!("Fix the failure in solution {}.", lineage[0]),
    };
    let execution = match val {
        Some(v) => format!("5-fold CV score: {v:.6}"),
        None => "Traceback (most recent call last):\n  File \"solution.py\", line 1, in <module>\nRuntimeError: simulated failure".to_string(),
    };
    Ok(SimOutcome {
        state: SimNodeState {
            key: 0,
            status,
            latent_quality: q,
            observed_val: val,
            observed_test: test,
        },
        code: format!("# simulated artifact\nprint(\"{execution}\")\n").replace("\n\"", "\""),
        plan,
        execution,
    })
}

/// Medal analogue: the node's test score clears the task threshold (inclusive).
pub fn success_event(state: &SimNodeState, task: &SimTask) -> bool {
    match (state.status, state.observed_test) {
        (Status::Valid, Some(test)) => task.metric().meets_threshold(test),
        _ => false,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SimSnapshot {
    task: SimTask,
    world_seed: u64,
    states: Vec<SimNodeState>,
}

/// [`Environment`] backed by a [`SimTask`].
#[derive(Clone, Debug)]
pub struct SimEnvironment {
    task: SimTask,
    world_seed: u64,
    states: Vec<SimNodeState>,
}

impl SimEnvironment {
    pub fn new(task: SimTask, world_seed: u64) -> Self {
        SimEnvironment {
            task,
            world_seed,
            states: vec![SimNodeState::root(world_seed)],
        }
    }

    pub fn from_snapshot(state: serde_json::Value) -> Result<Self> {
        let mut env = SimEnvironment::new(SimTask::default(), 0);
        env.restore(state)?;
        Ok(env)
    }

    pub fn task(&self) -> &SimTask {
        &self.task
    }

    pub fn world_seed(&self) -> u64 {
        self.world_seed
    }

    /// Hidden states indexed by node id.
    pub fn states(&self) -> &[SimNodeState] {
        &self.states
    }

    /// Best latent quality among valid nodes.
    pub fn best_latent_quality(&self) -> Option<f64> {
        self.states
            .iter()
            .filter(|s| s.status == Status::Valid)
            .map(|s| s.latent_quality)
            .max_by(f64::total_cmp)
    }
}

impl Environment for SimEnvironment {
    fn apply(&mut self, call: &OperatorCall, graph: &SearchGraph) -> Result<Outcome> {
        if self.states.len() != graph.len() {
            return Err(Error::InvalidArgument(format!(
                "simulator tracks {} nodes but graph has {}",
                self.states.len(),
                graph.len()
            )));
        }
        let parents: Vec<&SimNodeState> = call
            .targets
            .iter()
            .map(|t| self.states.get(t.0).ok_or(Error::UnknownNode(*t)))
            .collect::<Result<_>>()?;
        let primary = *call.targets.first().ok_or(Error::Arity {
            kind: call.kind.as_str(),
            expected: call.kind.arity(),
            got: 0,
        })?;
        let ordinal = graph.children(primary)?.len();
        let parent_keys: Vec<u64> = parents.iter().map(|p| p.key).collect();
        let key = node_key(call.kind, &parent_keys, ordinal) ^ self.states[0].key;
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let mut out = sim_apply(&self.task, call, &parents, &mut rng)?;
        out.state.key = key;
        self.states.push(out.state);
        Ok(Outcome {
            status: out.state.status,
            plan: out.plan,
            code: out.code,
            execution: out.execution,
            val_score: out.state.observed_val,
            test_score: out.state.observed_test,
        })
    }

    fn is_simulated(&self) -> bool {
        true
    }

    fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(SimSnapshot {
            task: self.task.clone(),
            world_seed: self.world_seed,
            states: self.states.clone(),
        })
        .expect("simulator state serializes")
    }

    fn restore(&mut self, state: serde_json::Value) -> Result<()> {
        let snap: SimSnapshot = serde_json::from_value(state)?;
        if snap.states.is_empty() {
            return Err(Error::Checkpoint("simulator snapshot has no root".into()));
        }
        self.task = snap.task;
        self.world_seed = snap.world_seed;
        self.states = snap.states;
        Ok(())
    }
}

/// Operator rules the oracle enumerates under.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OracleRules {
    pub operator_set: OperatorSet,
    pub debug: DebugBudget,
    pub costs: TickCosts,
}

/// Largest node cap [`oracle_best_reachable`] accepts.
pub const ORACLE_MAX_BUDGET: usize = 12;

#[derive(Clone, Copy)]
struct OracleNode {
    state: SimNodeState,
    children: usize,
    debug_depth: u32,
    debug_ticks: u64,
}

struct Oracle<'a> {
    task: &'a SimTask,
    rules: &'a OracleRules,
    root_key: u64,
    budget: usize,
    gain: f64,
    nodes: Vec<OracleNode>,
    seen: HashSet<(u64, u64)>,
    best: f64,
}

impl Oracle<'_> {
    fn signature(&self) -> (u64, u64) {
        self.nodes.iter().skip(1).fold((0u64, 0u64), |(a, b), n| {
            (
                a.wrapping_add(mix(n.state.key)),
                b ^ mix(n.state.key ^ 0xa5a5),
            )
        })
    }

    fn upper_bound(&self, remaining: usize) -> f64 {
        let top = self
            .nodes
            .iter()
            .skip(1)
            .map(|n| n.state.latent_quality)
            .fold(self.task.draft_quality.high, f64::max);
        (top + remaining as f64 * self.gain).min(self.task.quality_ceiling)
    }

    fn apply(&mut self, kind: OperatorKind, targets: &[usize]) {
        let primary = targets[0];
        let ordinal = self.nodes[primary].children;
        let cue = match (self.rules.operator_set, kind) {
            (OperatorSet::Aira, OperatorKind::Draft | OperatorKind::Improve) => {
                Some(complexity_cue(ordinal))
            }
            _ => None,
        };
        let parent_keys: Vec<u64> = targets.iter().map(|&t| self.nodes[t].state.key).collect();
        let key = node_key(kind, &parent_keys, ordinal) ^ self.root_key;
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let parents: Vec<&SimNodeState> = targets.iter().map(|&t| &self.nodes[t].state).collect();
        let (q, status, val, test) = draw(self.task, kind, cue, &parents, &mut rng);
        let (debug_depth, debug_ticks) = if kind == OperatorKind::Debug {
            let p = &self.nodes[primary];
            (p.debug_depth + 1, p.debug_ticks + self.rules.costs.debug)
        } else {
            (0, 0)
        };
        for &t in targets {
            self.nodes[t].children += 1;
        }
        self.nodes.push(OracleNode {
            state: SimNodeState {
                key,
                status,
                latent_quality: q,
                observed_val: val,
                observed_test: test,
            },
            children: 0,
            debug_depth,
            debug_ticks,
        });
    }

    fn undo(&mut self, targets: &[usize]) {
        self.nodes.pop();
        for &t in targets {
            self.nodes[t].children -= 1;
        }
    }

    fn moves(&self) -> Vec<(OperatorKind, Vec<usize>)> {
        let mut moves = vec![(OperatorKind::Draft, vec![0])];
        let valid: Vec<usize> = (1..self.nodes.len())
            .filter(|&i| self.nodes[i].state.status == Status::Valid)
            .collect();
        for (i, n) in self.nodes.iter().enumerate().skip(1) {
            match n.state.status {
                Status::Valid => moves.push((OperatorKind::Improve, vec![i])),
                Status::Buggy => {
                    let debuggable = self.rules.debug.check(n.debug_depth, n.debug_ticks)
                        == crate::operators::DebugVerdict::Continue
                        && n.debug_ticks + self.rules.costs.debug
                            <= self.rules.debug.max_chain_ticks;
                    if debuggable {
                        moves.push((OperatorKind::Debug, vec![i]));
                    }
                }
                Status::Unevaluated => {}
            }
        }
        if self.rules.operator_set.allows_crossover() {
            for &a in &valid {
                for &b in &valid {
                    if a != b {
                        moves.push((OperatorKind::Crossover, vec![a, b]));
                    }
                }
            }
        }
        moves
    }

    fn search(&mut self) {
        if let Some(n) = self.nodes.last() {
            if n.state.status == Status::Valid && n.state.latent_quality > self.best {
                self.best = n.state.latent_quality;
            }
        }
        let used = self.nodes.len() - 1;
        if used >= self.budget || self.best >= self.task.quality_ceiling {
            return;
        }
        if !self.seen.insert(self.signature()) {
            return;
        }
        if self.upper_bound(self.budget - used) <= self.best {
            return;
        }
        for (kind, targets) in self.moves() {
            self.apply(kind, &targets);
            self.search();
            self.undo(&targets);
        }
    }
}

/// Best latent quality of any valid node reachable within `budget` operator
/// applications, by exhaustive enumeration of operator sequences under the
/// same keyed draws a [`SimEnvironment`] seeded with `world_seed` uses.
///
/// `None` when no sequence yields a valid node.
///
/// The search is exponential in `budget`. Without Crossover every budget up
/// to the cap finishes in well under a second; with Crossover the pairwise
/// moves make budgets above about 7 take seconds to minutes.
pub fn oracle_best_reachable(
    task: &SimTask,
    budget: usize,
    world_seed: u64,
    rules: &OracleRules,
) -> Result<Option<f64>> {
    if budget > ORACLE_MAX_BUDGET {
        return Err(Error::InvalidArgument(format!(
            "oracle budget {budget} exceeds the exhaustive limit of {ORACLE_MAX_BUDGET}"
        )));
    }
    let root = SimNodeState::root(world_seed);
    let mut gain = task.improve_delta.max_high().max(0.0);
    if rules.operator_set.allows_crossover() {
        gain = gain.max(task.crossover_bonus.high);
    }
    let mut oracle = Oracle {
        task,
        rules,
        root_key: root.key,
        budget,
        gain,
        nodes: vec![OracleNode {
            state: root,
            children: 0,
            debug_depth: 0,
            debug_ticks: 0,
        }],
        seen: HashSet::new(),
        best: f64::NEG_INFINITY,
    };
    oracle.search();
    Ok(oracle.best.is_finite().then_some(oracle.best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeId, NodePayload, Origin};
    use crate::operators::{MemoryScope, MemoryView};

    fn call(kind: OperatorKind, targets: &[usize], cue: Option<ComplexityCue>) -> OperatorCall {
        OperatorCall {
            kind,
            targets: targets.iter().map(|&t| NodeId(t)).collect(),
            memory: MemoryView::empty(MemoryScope::Siblings),
            complexity: cue,
            budget: 0,
        }
    }

    fn state(q: f64) -> SimNodeState {
        SimNodeState {
            key: 1,
            status: Status::Valid,
            latent_quality: q,
            observed_val: Some(q),
            observed_test: Some(q),
        }
    }

    fn quiet_task() -> SimTask {
        SimTask {
            bug_prob: 0.0,
            val_noise_sigma: 0.0,
            test_noise_sigma: 0.0,
            ..SimTask::default()
        }
    }

    #[test]
    fn zero_noise_improve() {
        let task = SimTask {
            improve_delta: CueTable::uniform(UniformRange::point(0.1)),
            ..quiet_task()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let parent = state(0.5);
        let out = sim_apply(
            &task,
            &call(OperatorKind::Improve, &[1], None),
            &[&parent],
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.state.status, Status::Valid);
        assert!((out.state.observed_val.unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(out.state.observed_val, out.state.observed_test);
    }

    #[test]
    fn certain_bugs() {
        let task = SimTask {
            bug_prob: 1.0,
            ..SimTask::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (a, b) = (state(0.4), state(0.6));
        for (kind, targets, parents) in [
            (OperatorKind::Draft, vec![0], vec![&a]),
            (OperatorKind::Improve, vec![1], vec![&a]),
            (OperatorKind::Crossover, vec![1, 2], vec![&a, &b]),
        ] {
            for _ in 0..20 {
                let out =
                    sim_apply(&task, &call(kind, &targets, None), &parents, &mut rng).unwrap();
                assert_eq!(out.state.status, Status::Buggy);
                assert!(out.state.observed_val.is_none());
            }
        }
    }

    #[test]
    fn crossover_takes_best_parent_plus_bonus() {
        let task = SimTask {
            crossover_bonus: UniformRange::point(0.05),
            ..quiet_task()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = (state(0.4), state(0.7));
        let out = sim_apply(
            &task,
            &call(OperatorKind::Crossover, &[1, 2], None),
            &[&a, &b],
            &mut rng,
        )
        .unwrap();
        assert!((out.state.latent_quality - 0.75).abs() < 1e-12);
    }

    #[test]
    fn quality_is_capped() {
        let task = SimTask {
            quality_ceiling: 0.65,
            improve_delta: CueTable::uniform(UniformRange::point(0.1)),
            ..quiet_task()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = sim_apply(
            &task,
            &call(OperatorKind::Improve, &[1], None),
            &[&state(0.6)],
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.state.latent_quality, 0.65);
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let task = SimTask::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = state(0.4);
        assert!(sim_apply(
            &task,
            &call(OperatorKind::Crossover, &[1, 2], None),
            &[&a],
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn success_is_inclusive() {
        let task = SimTask {
            success_threshold: 0.75,
            ..SimTask::default()
        };
        let mut s = state(0.8);
        s.observed_test = Some(0.8);
        assert!(success_event(&s, &task));
        s.observed_test = Some(0.75);
        assert!(success_event(&s, &task));
        s.status = Status::Buggy;
        assert!(!success_event(&s, &task));
    }

    #[test]
    fn minimize_tasks_report_negated_scores() {
        let task = SimTask {
            direction: Direction::Minimize,
            success_threshold: -0.5,
            improve_delta: CueTable::uniform(UniformRange::point(0.1)),
            ..quiet_task()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let out = sim_apply(
            &task,
            &call(OperatorKind::Improve, &[1], None),
            &[&state(0.5)],
            &mut rng,
        )
        .unwrap();
        assert!((out.state.observed_test.unwrap() + 0.6).abs() < 1e-12);
        assert!(success_event(&out.state, &task));
    }

    #[test]
    fn debug_never_lowers_quality() {
        let task = SimTask {
            debug_fix_prob: 0.5,
            ..SimTask::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut cur = SimNodeState {
            status: Status::Buggy,
            ..state(0.42)
        };
        for _ in 0..50 {
            let out = sim_apply(
                &task,
                &call(OperatorKind::Debug, &[1], None),
                &[&cur],
                &mut rng,
            )
            .unwrap();
            assert_eq!(out.state.latent_quality, cur.latent_quality);
            cur = out.state;
        }
    }

    #[test]
    fn noise_has_configured_spread() {
        let task = SimTask {
            bug_prob: 0.0,
            val_noise_sigma: 0.1,
            ..SimTask::default()
        };
        let mut env = SimEnvironment::new(task, 99);
        let mut g = SearchGraph::with_root();
        let n = 10_000;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let c = call(OperatorKind::Draft, &[0], None);
            let out = env.apply(&c, &g).unwrap();
            let id = g
                .add_node(
                    &[NodeId(0)],
                    NodePayload::new(Origin::Draft, out.status)
                        .with_scores(out.val_score, out.test_score),
                )
                .unwrap();
            let s = env.states()[id.0];
            sum_sq += (s.observed_val.unwrap() - s.latent_quality).powi(2);
        }
        let sigma = (sum_sq / n as f64).sqrt();
        assert!((sigma - 0.1).abs() / 0.1 < 0.05, "empirical sigma {sigma}");
    }

    #[test]
    fn keyed_draws_do_not_depend_on_history() {
        let task = SimTask::default();
        let mut g1 = SearchGraph::with_root();
        let mut e1 = SimEnvironment::new(task.clone(), 5);
        let mut g2 = SearchGraph::with_root();
        let mut e2 = SimEnvironment::new(task, 5);
        let d = call(OperatorKind::Draft, &[0], None);
        let o1 = e1.apply(&d, &g1).unwrap();
        g1.add_node(&[NodeId(0)], NodePayload::new(Origin::Draft, o1.status))
            .unwrap();
        let o2 = e2.apply(&d, &g2).unwrap();
        g2.add_node(&[NodeId(0)], NodePayload::new(Origin::Draft, o2.status))
            .unwrap();
        assert_eq!(e1.states()[1], e2.states()[1]);
        let other = SimEnvironment::new(SimTask::default(), 6);
        assert_ne!(other.states()[0].key, e1.states()[0].key);
    }

    #[test]
    fn oracle_small_budgets() {
        let task = SimTask {
            draft_quality: UniformRange::point(0.3),
            improve_delta: CueTable::uniform(UniformRange::point(0.1)),
            crossover_bonus: UniformRange::point(0.0),
            ..quiet_task()
        };
        let rules = OracleRules::default();
        assert_eq!(
            oracle_best_reachable(&task, 1, 1, &rules).unwrap(),
            Some(0.3)
        );
        let two = oracle_best_reachable(&task, 2, 1, &rules).unwrap().unwrap();
        assert!((two - 0.4).abs() < 1e-12);
        assert_eq!(oracle_best_reachable(&task, 0, 1, &rules).unwrap(), None);
        assert!(oracle_best_reachable(&task, 13, 1, &rules).is_err());
    }
}
