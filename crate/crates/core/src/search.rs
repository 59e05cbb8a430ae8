//! The search loop: select, choose an operator, apply it, score, update.
//!
//! A [`Search`] advances one operator application per [`Search::step`], so a
//! run can be paused at any tick boundary, checkpointed and resumed. Policy
//! bookkeeping that spans several applications (an MCTS expansion with its
//! debug loops, an evolutionary reproduction waiting on parent fixes) lives in
//! [`PolicyState`] and is serialized with the rest of the run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, Outcome};
use crate::error::{Error, Result};
use crate::fitness::{orient, update_bounds, MetricSpec, NormalizationState};
use crate::graph::{NodeId, NodePayload, SearchGraph, Status};
use crate::operators::{
    aide_operator_policy, complexity_cue, scoped_memory, DebugBudget, OperatorCall, OperatorKind,
    OperatorSet, TickCosts,
};
use crate::policy::{
    evo_replace, evo_select_pair, evo_select_parent, greedy_select, mcts_backup, mcts_select,
    EvoConfig, GreedyConfig, MctsConfig, Member, Population,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    Greedy,
    Mcts,
    Evolutionary,
}

/// Which metric guides the search and which picks the final node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Validation for both search and final selection (the honest setting).
    #[default]
    ValVal,
    /// Validation-guided search, final node picked by test score.
    ValTest,
    /// Test score guides the search and picks the final node.
    TestTest,
}

impl OracleMode {
    pub const ALL: [OracleMode; 3] = [
        OracleMode::ValVal,
        OracleMode::ValTest,
        OracleMode::TestTest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OracleMode::ValVal => "val_val",
            OracleMode::ValTest => "val_test",
            OracleMode::TestTest => "test_test",
        }
    }

    fn search_on_test(self) -> bool {
        self == OracleMode::TestTest
    }

    fn select_on_test(self) -> bool {
        self != OracleMode::ValVal
    }
}

/// Termination and cost settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    pub max_ticks: u64,
    /// Cap on non-root artifacts.
    pub max_nodes: usize,
    /// Wall-clock cap for one live execution, in seconds.
    pub per_execution_timeout_secs: u64,
    pub debug: DebugBudget,
    pub costs: TickCosts,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            max_ticks: 288,
            max_nodes: 500,
            per_execution_timeout_secs: 4 * 3600,
            debug: DebugBudget::default(),
            costs: TickCosts::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub policy: PolicyKind,
    pub operator_set: OperatorSet,
    pub greedy: GreedyConfig,
    pub mcts: MctsConfig,
    pub evo: EvoConfig,
    pub budgets: Budgets,
    pub seed: u64,
    pub oracle_mode: OracleMode,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            policy: PolicyKind::Greedy,
            operator_set: OperatorSet::Aira,
            greedy: GreedyConfig::default(),
            mcts: MctsConfig::default(),
            evo: EvoConfig::default(),
            budgets: Budgets::default(),
            seed: 0,
            oracle_mode: OracleMode::ValVal,
        }
    }
}

impl PolicyConfig {
    pub fn greedy(operator_set: OperatorSet) -> Self {
        PolicyConfig {
            policy: PolicyKind::Greedy,
            operator_set,
            ..PolicyConfig::default()
        }
    }

    pub fn mcts() -> Self {
        PolicyConfig {
            policy: PolicyKind::Mcts,
            ..PolicyConfig::default()
        }
    }

    pub fn evolutionary() -> Self {
        PolicyConfig {
            policy: PolicyKind::Evolutionary,
            ..PolicyConfig::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_nodes(mut self, max_nodes: usize) -> Self {
        self.budgets.max_nodes = max_nodes;
        self
    }

    pub fn with_max_ticks(mut self, max_ticks: u64) -> Self {
        self.budgets.max_ticks = max_ticks;
        self
    }

    pub fn with_oracle_mode(mut self, mode: OracleMode) -> Self {
        self.oracle_mode = mode;
        self
    }

    /// Whether evolutionary reproduction may use Crossover.
    fn crossover_enabled(&self) -> bool {
        self.operator_set.allows_crossover() && self.evo.improve_probability < 1.0
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |what: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must lie in [0, 1], got {p}")))
            }
        };
        prob("greedy.epsilon_bug", self.greedy.epsilon_bug)?;
        prob("evo.improve_probability", self.evo.improve_probability)?;
        if self.greedy.n_drafts == 0 {
            return Err(Error::Config("greedy.n_drafts must be positive".into()));
        }
        if !(self.mcts.uct_c >= 0.0 && self.mcts.uct_c.is_finite()) {
            return Err(Error::Config(
                "mcts.uct_c must be a nonnegative number".into(),
            ));
        }
        if !(self.mcts.uct_epsilon > 0.0 && self.mcts.uct_epsilon.is_finite()) {
            return Err(Error::Config("mcts.uct_epsilon must be positive".into()));
        }
        if self.mcts.num_children == 0 {
            return Err(Error::Config("mcts.num_children must be positive".into()));
        }
        if self.evo.population_size == 0 || self.evo.candidates_per_generation == 0 {
            return Err(Error::Config("evolutionary sizes must be positive".into()));
        }
        if self.evo.candidates_per_generation > self.evo.population_size {
            return Err(Error::Config(format!(
                "candidates_per_generation {} exceeds population_size {}",
                self.evo.candidates_per_generation, self.evo.population_size
            )));
        }
        if self.policy == PolicyKind::Evolutionary
            && self.crossover_enabled()
            && self.evo.population_size < 2
        {
            return Err(Error::Config(
                "crossover needs a population of at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// Anytime trajectory entry, one per consumed tick.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    /// Best observed validation score so far (raw units).
    pub best_val: Option<f64>,
    /// Test score of the node holding `best_val`.
    pub best_val_test: Option<f64>,
}

/// One evolutionary replacement, recorded when tracing is enabled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u64,
    pub before: Vec<Member>,
    pub offspring: Vec<Member>,
    pub after: Vec<Member>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub leaf: NodeId,
    pub kind: OperatorKind,
    pub created: usize,
    /// Buggy child currently going through the automatic debug loop.
    pub fixing: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub kind: OperatorKind,
    /// Population indices of the chosen parents.
    pub slots: Vec<usize>,
}

/// Policy bookkeeping carried across steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum PolicyState {
    Greedy,
    Mcts {
        pending: Option<Expansion>,
    },
    Evolutionary {
        population: Population,
        offspring: Vec<Member>,
        pending: Option<Reproduction>,
        generation: u64,
        trace: Option<Vec<GenerationRecord>>,
    },
}

impl PolicyState {
    fn initial(policy: PolicyKind) -> Self {
        match policy {
            PolicyKind::Greedy => PolicyState::Greedy,
            PolicyKind::Mcts => PolicyState::Mcts { pending: None },
            PolicyKind::Evolutionary => PolicyState::Evolutionary {
                population: Population::default(),
                offspring: Vec::new(),
                pending: None,
                generation: 0,
                trace: None,
            },
        }
    }
}

/// Outcome of a finished run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub final_node: Option<NodeId>,
    pub final_val: Option<f64>,
    pub final_test: Option<f64>,
    /// Final test score clears the task threshold.
    pub success: bool,
    /// Final validation score clears the task threshold.
    pub perceived_success: bool,
    pub graph: SearchGraph,
    pub tick_log: Vec<TickRecord>,
    pub ticks: u64,
}

/// Everything needed to continue a run exactly where it paused.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunState {
    pub cfg: PolicyConfig,
    pub metric: MetricSpec,
    pub graph: SearchGraph,
    pub norm: NormalizationState,
    pub policy: PolicyState,
    pub rng: ChaCha8Rng,
    pub ticks: u64,
    pub tick_log: Vec<TickRecord>,
    pub best: Option<NodeId>,
    pub finished: bool,
    pub env: serde_json::Value,
}

enum Action {
    Apply(OperatorKind, Vec<NodeId>),
    Stop,
}

pub struct Search<E: Environment> {
    cfg: PolicyConfig,
    metric: MetricSpec,
    graph: SearchGraph,
    norm: NormalizationState,
    policy: PolicyState,
    rng: ChaCha8Rng,
    ticks: u64,
    tick_log: Vec<TickRecord>,
    /// Node with the best validation score so far.
    best: Option<NodeId>,
    finished: bool,
    env: E,
}

impl<E: Environment> Search<E> {
    pub fn new(cfg: PolicyConfig, metric: MetricSpec, env: E) -> Result<Self> {
        cfg.validate()?;
        if cfg.oracle_mode != OracleMode::ValVal && !env.is_simulated() {
            return Err(Error::Config(format!(
                "oracle mode {} needs a simulated task",
                cfg.oracle_mode.as_str()
            )));
        }
        Ok(Search {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            policy: PolicyState::initial(cfg.policy),
            cfg,
            metric,
            graph: SearchGraph::with_root(),
            norm: NormalizationState::new(),
            ticks: 0,
            tick_log: Vec::new(),
            best: None,
            finished: false,
            env,
        })
    }

    /// Continues a paused run; `env` must be a fresh environment of the same
    /// type, its hidden state is restored from the snapshot.
    pub fn resume(state: RunState, mut env: E) -> Result<Self> {
        state.cfg.validate()?;
        if PolicyState::initial(state.cfg.policy).policy_name() != state.policy.policy_name() {
            return Err(Error::Checkpoint(
                "policy state does not match the configured policy".into(),
            ));
        }
        env.restore(state.env)?;
        Ok(Search {
            cfg: state.cfg,
            metric: state.metric,
            graph: state.graph,
            norm: state.norm,
            policy: state.policy,
            rng: state.rng,
            ticks: state.ticks,
            tick_log: state.tick_log,
            best: state.best,
            finished: state.finished,
            env,
        })
    }

    pub fn state(&self) -> RunState {
        RunState {
            cfg: self.cfg,
            metric: self.metric.clone(),
            graph: self.graph.clone(),
            norm: self.norm,
            policy: self.policy.clone(),
            rng: self.rng.clone(),
            ticks: self.ticks,
            tick_log: self.tick_log.clone(),
            best: self.best,
            finished: self.finished,
            env: self.env.snapshot(),
        }
    }

    /// Keep a record of every evolutionary replacement.
    pub fn trace_generations(&mut self) {
        if let PolicyState::Evolutionary { trace, .. } = &mut self.policy {
            trace.get_or_insert_with(Vec::new);
        }
    }

    pub fn generation_trace(&self) -> &[GenerationRecord] {
        match &self.policy {
            PolicyState::Evolutionary { trace: Some(t), .. } => t,
            _ => &[],
        }
    }

    pub fn population(&self) -> Option<&Population> {
        match &self.policy {
            PolicyState::Evolutionary { population, .. } => Some(population),
            _ => None,
        }
    }

    pub fn generation(&self) -> u64 {
        match &self.policy {
            PolicyState::Evolutionary { generation, .. } => *generation,
            _ => 0,
        }
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn metric(&self) -> &MetricSpec {
        &self.metric
    }

    pub fn graph(&self) -> &SearchGraph {
        &self.graph
    }

    pub fn normalization(&self) -> &NormalizationState {
        &self.norm
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn tick_log(&self) -> &[TickRecord] {
        &self.tick_log
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Applies one operator. Returns `false` once the run has terminated.
    pub fn step(&mut self) -> Result<bool> {
        if self.finished {
            return Ok(false);
        }
        if self.graph.artifact_count() >= self.cfg.budgets.max_nodes {
            self.finished = true;
            return Ok(false);
        }
        let action = match self.cfg.policy {
            PolicyKind::Greedy => self.greedy_action()?,
            PolicyKind::Mcts => self.mcts_action()?,
            PolicyKind::Evolutionary => self.evo_action()?,
        };
        let Action::Apply(kind, targets) = action else {
            self.finished = true;
            return Ok(false);
        };
        if self.ticks + self.cfg.budgets.costs.of(kind) > self.cfg.budgets.max_ticks {
            self.finished = true;
            return Ok(false);
        }
        let id = self.apply(kind, &targets)?;
        match self.cfg.policy {
            PolicyKind::Greedy => {}
            PolicyKind::Mcts => self.mcts_after(id)?,
            PolicyKind::Evolutionary => self.evo_after(kind, id)?,
        }
        Ok(true)
    }

    /// Runs to termination.
    pub fn run(&mut self) -> Result<()> {
        while self.step()? {}
        Ok(())
    }

    /// Steps until at least `ticks` have been consumed or the run ends.
    pub fn run_until_tick(&mut self, ticks: u64) -> Result<()> {
        while self.ticks < ticks && self.step()? {}
        Ok(())
    }

    pub fn result(&self) -> Result<RunResult> {
        let final_node = match select_final(&self.graph, self.cfg.oracle_mode, &self.metric) {
            Ok(id) => Some(id),
            Err(Error::NoCandidate) => None,
            Err(e) => return Err(e),
        };
        let node = final_node.map(|id| &self.graph.nodes()[id.0]);
        let final_val = node.and_then(|n| n.val_score);
        let final_test = node.and_then(|n| n.test_score);
        Ok(RunResult {
            final_node,
            final_val,
            final_test,
            success: final_test.is_some_and(|t| self.metric.meets_threshold(t)),
            perceived_success: final_val.is_some_and(|v| self.metric.meets_threshold(v)),
            graph: self.graph.clone(),
            tick_log: self.tick_log.clone(),
            ticks: self.ticks,
        })
    }

    pub fn into_parts(self) -> Result<(RunResult, E)> {
        let result = self.result()?;
        Ok((result, self.env))
    }

    // ----- operator application -------------------------------------------

    fn cue_for(
        &self,
        kind: OperatorKind,
        target: NodeId,
    ) -> Result<Option<crate::operators::ComplexityCue>> {
        let cued = self.cfg.operator_set == OperatorSet::Aira
            && matches!(kind, OperatorKind::Draft | OperatorKind::Improve);
        Ok(if cued {
            Some(complexity_cue(self.graph.children(target)?.len()))
        } else {
            None
        })
    }

    fn apply(&mut self, kind: OperatorKind, targets: &[NodeId]) -> Result<NodeId> {
        let cost = self.cfg.budgets.costs.of(kind);
        let call = OperatorCall {
            kind,
            targets: targets.to_vec(),
            memory: scoped_memory(&self.graph, targets[0], kind, self.cfg.operator_set)?,
            complexity: self.cue_for(kind, targets[0])?,
            budget: self.cfg.budgets.max_ticks - self.ticks,
        };
        let outcome = self.env.apply(&call, &self.graph)?;
        let id = self.commit(kind, targets, outcome, cost)?;
        self.ticks += cost;
        let best = self.best.map(|b| &self.graph.nodes()[b.0]);
        for _ in 0..cost {
            self.tick_log.push(TickRecord {
                tick: self.tick_log.len() as u64 + 1,
                best_val: best.and_then(|n| n.val_score),
                best_val_test: best.and_then(|n| n.test_score),
            });
        }
        Ok(id)
    }

    fn guide_score(&self, val: Option<f64>, test: Option<f64>) -> Option<f64> {
        if self.cfg.oracle_mode.search_on_test() {
            test
        } else {
            val
        }
    }

    fn commit(
        &mut self,
        kind: OperatorKind,
        targets: &[NodeId],
        outcome: Outcome,
        cost: u64,
    ) -> Result<NodeId> {
        let origin = kind
            .origin()
            .ok_or_else(|| Error::InvalidArgument("memory does not produce nodes".into()))?;
        let guide = self.guide_score(outcome.val_score, outcome.test_score);
        let oriented = match (outcome.status, guide) {
            (Status::Valid, Some(raw)) => Some(orient(raw, &self.metric)?),
            (Status::Valid, None) => {
                return Err(Error::InvalidPayload(format!(
                    "{kind} produced a valid artifact without a {} score",
                    if self.cfg.oracle_mode.search_on_test() {
                        "test"
                    } else {
                        "validation"
                    }
                )))
            }
            _ => None,
        };
        let payload = NodePayload {
            origin,
            plan: outcome.plan,
            code: outcome.code,
            execution: outcome.execution,
            status: outcome.status,
            val_score: outcome.val_score,
            test_score: outcome.test_score,
            cost,
            created_at: self.ticks,
        };
        let id = self.graph.add_node(targets, payload)?;

        let fitness = match oriented {
            Some(o) => {
                let before = self.norm;
                self.norm = update_bounds(self.norm, o)?;
                let moved = before.count == 0
                    || before.observed_min != self.norm.observed_min
                    || before.observed_max != self.norm.observed_max;
                if moved {
                    self.refresh_fitness()?;
                } else {
                    self.graph.node_mut(id)?.fitness = Some(self.norm.normalize(o)?);
                }
                self.graph.node(id)?.fitness.unwrap_or(0.0)
            }
            None => {
                self.graph.node_mut(id)?.fitness = Some(0.0);
                0.0
            }
        };
        self.graph.evaluate(id, fitness)?;

        let node = self.graph.node(id)?;
        if let Some(v) = node.val_score {
            let improves = match self.best {
                None => true,
                Some(b) => self
                    .metric
                    .better(v, self.graph.nodes()[b.0].val_score.unwrap_or(v)),
            };
            if improves {
                self.best = Some(id);
            }
        }
        Ok(id)
    }

    /// Recomputes every valid node's fitness from its stored raw score.
    fn refresh_fitness(&mut self) -> Result<()> {
        let norm = self.norm;
        let metric = self.metric.clone();
        let on_test = self.cfg.oracle_mode.search_on_test();
        for i in 1..self.graph.len() {
            let node = self.graph.node_mut(NodeId(i))?;
            if node.is_valid() {
                let raw = if on_test {
                    node.test_score
                } else {
                    node.val_score
                };
                let raw = raw.ok_or(Error::Unevaluated(node.id))?;
                node.fitness = Some(norm.normalize(orient(raw, &metric)?)?);
            }
        }
        Ok(())
    }

    // ----- greedy ------------------------------------------------------------

    fn greedy_action(&mut self) -> Result<Action> {
        let budgets = self.cfg.budgets;
        let selected = greedy_select(
            &self.graph,
            &self.cfg.greedy,
            &budgets.debug,
            budgets.costs.debug,
            &mut self.rng,
        );
        let kind = aide_operator_policy(&self.graph, selected, &self.cfg.greedy)?;
        let target = if kind == OperatorKind::Draft {
            self.graph.root_id()
        } else {
            selected
        };
        Ok(Action::Apply(kind, vec![target]))
    }

    // ----- MCTS --------------------------------------------------------------

    fn mcts_action(&mut self) -> Result<Action> {
        let budgets = self.cfg.budgets;
        let num_children = self.cfg.mcts.num_children;
        loop {
            let PolicyState::Mcts { pending } = &mut self.policy else {
                unreachable!()
            };
            let Some(exp) = pending.as_mut() else {
                let leaf = mcts_select(
                    &self.graph,
                    &self.cfg.mcts,
                    &budgets.debug,
                    budgets.costs.debug,
                )?;
                let node = self.graph.node(leaf)?;
                let kind = match node.status {
                    Status::Unevaluated => OperatorKind::Draft,
                    Status::Valid => OperatorKind::Improve,
                    Status::Buggy => OperatorKind::Debug,
                };
                if kind == OperatorKind::Debug && !budgets.debug.permits(node, budgets.costs.debug)
                {
                    // only possible when every branch is exhausted
                    return Ok(Action::Stop);
                }
                *pending = Some(Expansion {
                    leaf,
                    kind,
                    created: 0,
                    fixing: None,
                });
                continue;
            };
            if let Some(b) = exp.fixing {
                if budgets
                    .debug
                    .permits(self.graph.node(b)?, budgets.costs.debug)
                {
                    return Ok(Action::Apply(OperatorKind::Debug, vec![b]));
                }
                exp.fixing = None;
                continue;
            }
            if exp.created < num_children {
                let leaf = self.graph.node(exp.leaf)?;
                if exp.kind == OperatorKind::Debug
                    && !budgets.debug.permits(leaf, budgets.costs.debug)
                {
                    *pending = None;
                    continue;
                }
                let target = if exp.kind == OperatorKind::Draft {
                    self.graph.root_id()
                } else {
                    exp.leaf
                };
                return Ok(Action::Apply(exp.kind, vec![target]));
            }
            *pending = None;
        }
    }

    fn mcts_after(&mut self, id: NodeId) -> Result<()> {
        let fitness = self
            .graph
            .node(id)?
            .eval_fitness
            .ok_or(Error::Unevaluated(id))?;
        mcts_backup(&mut self.graph, id, fitness)?;
        let buggy = self.graph.node(id)?.is_buggy();
        let PolicyState::Mcts { pending: Some(exp) } = &mut self.policy else {
            return Ok(());
        };
        if exp.fixing.is_none() {
            exp.created += 1;
        }
        exp.fixing = buggy.then_some(id);
        Ok(())
    }

    // ----- evolutionary ------------------------------------------------------

    fn usable(&self, id: NodeId) -> bool {
        let b = self.cfg.budgets;
        let node = &self.graph.nodes()[id.0];
        node.is_valid() || b.debug.permits(node, b.costs.debug)
    }

    fn refresh_population(&mut self) {
        let graph = &self.graph;
        if let PolicyState::Evolutionary {
            population,
            offspring,
            ..
        } = &mut self.policy
        {
            for m in population.members.iter_mut().chain(offspring.iter_mut()) {
                m.fitness = graph.nodes()[m.id.0].fitness.unwrap_or(0.0);
            }
        }
    }

    /// Proportional draw over usable members, skipping `exclude`.
    fn draw_slot(&mut self, exclude: &[usize]) -> Result<Option<usize>> {
        let PolicyState::Evolutionary { population, .. } = &self.policy else {
            unreachable!()
        };
        let candidates: Vec<usize> = (0..population.len())
            .filter(|i| !exclude.contains(i) && self.usable(population.members[*i].id))
            .collect();
        if candidates.is_empty() {
            return Ok(None);
        }
        let pool = Population::new(candidates.iter().map(|&i| population.members[i]).collect());
        let id = evo_select_parent(&pool, &mut self.rng)?;
        Ok(candidates
            .into_iter()
            .find(|&i| population.members[i].id == id))
    }

    fn draw_pair(&mut self) -> Result<Option<Vec<usize>>> {
        let PolicyState::Evolutionary { population, .. } = &self.policy else {
            unreachable!()
        };
        let candidates: Vec<usize> = (0..population.len())
            .filter(|&i| self.usable(population.members[i].id))
            .collect();
        if candidates.len() < 2 {
            return Ok(None);
        }
        let pool = Population::new(candidates.iter().map(|&i| population.members[i]).collect());
        let (a, b) = evo_select_pair(&pool, &mut self.rng)?;
        let index = |id: NodeId| {
            candidates
                .iter()
                .copied()
                .find(|&i| population.members[i].id == id)
        };
        Ok(index(a).zip(index(b)).map(|(a, b)| vec![a, b]))
    }

    fn evo_action(&mut self) -> Result<Action> {
        self.refresh_population();
        let pop_size = self.cfg.evo.population_size;
        loop {
            let PolicyState::Evolutionary {
                population,
                pending,
                ..
            } = &self.policy
            else {
                unreachable!()
            };
            if population.len() < pop_size {
                return Ok(Action::Apply(
                    OperatorKind::Draft,
                    vec![self.graph.root_id()],
                ));
            }
            let Some(repro) = pending.clone() else {
                let crossover = self.cfg.crossover_enabled()
                    && self.rng.random::<f64>() >= self.cfg.evo.improve_probability;
                let chosen = if crossover {
                    self.draw_pair()?
                        .map(|slots| (OperatorKind::Crossover, slots))
                } else {
                    None
                };
                let chosen = match chosen {
                    Some(c) => Some(c),
                    None => self
                        .draw_slot(&[])?
                        .map(|s| (OperatorKind::Improve, vec![s])),
                };
                let repro = chosen
                    .map(|(kind, slots)| Reproduction { kind, slots })
                    .unwrap_or(Reproduction {
                        kind: OperatorKind::Draft,
                        slots: Vec::new(),
                    });
                self.set_pending(Some(repro));
                continue;
            };
            if repro.kind == OperatorKind::Draft {
                return Ok(Action::Apply(
                    OperatorKind::Draft,
                    vec![self.graph.root_id()],
                ));
            }
            let ids: Vec<NodeId> = repro
                .slots
                .iter()
                .map(|&s| population.members[s].id)
                .collect();
            let mut blocked = None;
            for (pos, &id) in ids.iter().enumerate() {
                let node = &self.graph.nodes()[id.0];
                if node.is_buggy() {
                    if self.usable(id) {
                        return Ok(Action::Apply(OperatorKind::Debug, vec![id]));
                    }
                    blocked = Some(pos);
                    break;
                }
            }
            let Some(pos) = blocked else {
                return Ok(Action::Apply(repro.kind, ids));
            };
            // the parent ran out of debug budget: resample that slot
            let mut slots = repro.slots.clone();
            let mut exclude = slots.clone();
            exclude.remove(pos);
            exclude.push(slots[pos]);
            let replacement = self.draw_slot(&exclude)?;
            let next = match (replacement, repro.kind) {
                (Some(s), kind) => {
                    slots[pos] = s;
                    Reproduction { kind, slots }
                }
                (None, OperatorKind::Crossover) => {
                    slots.remove(pos);
                    Reproduction {
                        kind: OperatorKind::Improve,
                        slots,
                    }
                }
                (None, _) => Reproduction {
                    kind: OperatorKind::Draft,
                    slots: Vec::new(),
                },
            };
            self.set_pending(Some(next));
        }
    }

    fn set_pending(&mut self, value: Option<Reproduction>) {
        if let PolicyState::Evolutionary { pending, .. } = &mut self.policy {
            *pending = value;
        }
    }

    fn evo_after(&mut self, kind: OperatorKind, id: NodeId) -> Result<()> {
        let fitness = self.graph.node(id)?.fitness.unwrap_or(0.0);
        let member = Member { id, fitness };
        let cpg = self.cfg.evo.candidates_per_generation;
        let pop_size = self.cfg.evo.population_size;
        let debugged_parent = if kind == OperatorKind::Debug {
            self.graph.node(id)?.primary_parent()
        } else {
            None
        };
        let PolicyState::Evolutionary {
            population,
            offspring,
            pending,
            ..
        } = &mut self.policy
        else {
            unreachable!()
        };
        if population.len() < pop_size && pending.is_none() {
            population.members.push(member);
            return Ok(());
        }
        if let Some(parent) = debugged_parent {
            // the debug attempt becomes the member so its chain continues or the fix is used
            if let Some(m) = population.members.iter_mut().find(|m| m.id == parent) {
                *m = member;
            }
            return Ok(());
        }
        offspring.push(member);
        *pending = None;
        if offspring.len() == cpg {
            self.refresh_population();
            let PolicyState::Evolutionary {
                population,
                offspring,
                generation,
                trace,
                ..
            } = &mut self.policy
            else {
                unreachable!()
            };
            let next = evo_replace(population, offspring)?;
            *generation += 1;
            if let Some(trace) = trace {
                trace.push(GenerationRecord {
                    generation: *generation,
                    before: population.members.clone(),
                    offspring: offspring.clone(),
                    after: next.members.clone(),
                });
            }
            *population = next;
            offspring.clear();
        }
        Ok(())
    }
}

impl PolicyState {
    fn policy_name(&self) -> &'static str {
        match self {
            PolicyState::Greedy => "greedy",
            PolicyState::Mcts { .. } => "mcts",
            PolicyState::Evolutionary { .. } => "evolutionary",
        }
    }
}

/// Runs a search to termination.
pub fn run_search<E: Environment>(
    cfg: PolicyConfig,
    metric: MetricSpec,
    env: E,
) -> Result<RunResult> {
    let mut search = Search::new(cfg, metric, env)?;
    search.run()?;
    search.result()
}

fn argmax_by<'a>(
    nodes: impl Iterator<Item = &'a crate::graph::ArtifactNode>,
    score: impl Fn(&crate::graph::ArtifactNode) -> Option<f64>,
    metric: &MetricSpec,
) -> Option<NodeId> {
    let mut best: Option<(NodeId, f64)> = None;
    for node in nodes {
        if let Some(s) = score(node) {
            if best.is_none_or(|(_, b)| metric.better(s, b)) {
                best = Some((node.id, s));
            }
        }
    }
    best.map(|(id, _)| id)
}

/// Picks the submission node: best validation score for ValVal, best test
/// score for the oracle modes. Ties go to the lowest id.
pub fn select_final(graph: &SearchGraph, mode: OracleMode, metric: &MetricSpec) -> Result<NodeId> {
    let by_test = mode.select_on_test();
    argmax_by(
        graph.valid_nodes(),
        |n| if by_test { n.test_score } else { n.val_score },
        metric,
    )
    .ok_or(Error::NoCandidate)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopKStrategy {
    TopKByVal,
    RandomK,
}

/// Best test score among `k` valid nodes chosen by validation rank or at
/// random. `k` is clipped to the number of valid nodes.
pub fn topk_selection_score<R: Rng + ?Sized>(
    graph: &SearchGraph,
    k: usize,
    strategy: TopKStrategy,
    metric: &MetricSpec,
    rng: &mut R,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut valid: Vec<&crate::graph::ArtifactNode> = graph
        .valid_nodes()
        .filter(|n| n.val_score.is_some() && n.test_score.is_some())
        .collect();
    if valid.is_empty() {
        return Err(Error::NoCandidate);
    }
    let k = k.min(valid.len());
    let chosen: Vec<&crate::graph::ArtifactNode> = match strategy {
        TopKStrategy::TopKByVal => {
            valid.sort_by(|a, b| {
                let (va, vb) = (a.val_score.unwrap_or(0.0), b.val_score.unwrap_or(0.0));
                let o = if metric.better(va, vb) {
                    std::cmp::Ordering::Less
                } else if metric.better(vb, va) {
                    std::cmp::Ordering::Greater
                } else {
                    std::cmp::Ordering::Equal
                };
                o.then(a.id.cmp(&b.id))
            });
            valid.truncate(k);
            valid
        }
        TopKStrategy::RandomK => rand::seq::index::sample(rng, valid.len(), k)
            .into_iter()
            .map(|i| valid[i])
            .collect(),
    };
    let best = argmax_by(chosen.into_iter(), |n| n.test_score, metric).ok_or(Error::NoCandidate)?;
    Ok(graph.nodes()[best.0].test_score.unwrap_or(f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitness::MetricSpec;
    use crate::graph::{NodePayload, Origin};
    use crate::sim::{SimEnvironment, SimTask};

    fn scored_graph(scores: &[(f64, f64)]) -> SearchGraph {
        let mut g = SearchGraph::with_root();
        for &(v, t) in scores {
            g.add_node(
                &[NodeId(0)],
                NodePayload::new(Origin::Draft, Status::Valid).with_scores(Some(v), Some(t)),
            )
            .unwrap();
        }
        g
    }

    #[test]
    fn select_final_modes() {
        let metric = MetricSpec::maximize("m");
        let g = scored_graph(&[(0.9, 0.5), (0.7, 0.8)]);
        assert_eq!(
            select_final(&g, OracleMode::ValVal, &metric).unwrap(),
            NodeId(1)
        );
        assert_eq!(
            select_final(&g, OracleMode::TestTest, &metric).unwrap(),
            NodeId(2)
        );
        let one = scored_graph(&[(0.1, 0.2)]);
        for mode in OracleMode::ALL {
            assert_eq!(select_final(&one, mode, &metric).unwrap(), NodeId(1));
        }
        let mut buggy = SearchGraph::with_root();
        buggy
            .add_node(&[NodeId(0)], NodePayload::new(Origin::Draft, Status::Buggy))
            .unwrap();
        assert!(matches!(
            select_final(&buggy, OracleMode::ValVal, &metric),
            Err(Error::NoCandidate)
        ));
    }

    #[test]
    fn minimize_selects_lowest() {
        let metric = MetricSpec::minimize("rmse");
        let g = scored_graph(&[(0.9, 0.5), (0.7, 0.8)]);
        assert_eq!(
            select_final(&g, OracleMode::ValVal, &metric).unwrap(),
            NodeId(2)
        );
    }

    #[test]
    fn topk_hand_built() {
        let metric = MetricSpec::maximize("m");
        let g = scored_graph(&[(0.5, 0.1), (0.9, 0.3), (0.8, 0.9), (0.2, 1.0), (0.7, 0.4)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            topk_selection_score(&g, 1, TopKStrategy::TopKByVal, &metric, &mut rng).unwrap(),
            0.3
        );
        assert_eq!(
            topk_selection_score(&g, 2, TopKStrategy::TopKByVal, &metric, &mut rng).unwrap(),
            0.9
        );
        for strategy in [TopKStrategy::TopKByVal, TopKStrategy::RandomK] {
            assert_eq!(
                topk_selection_score(&g, 9, strategy, &metric, &mut rng).unwrap(),
                1.0
            );
        }
        assert!(topk_selection_score(&g, 0, TopKStrategy::RandomK, &metric, &mut rng).is_err());
    }

    #[test]
    fn zero_budget_keeps_root_only() {
        let task = SimTask::default();
        let cfg = PolicyConfig::default().with_max_nodes(0);
        let r = run_search(cfg, task.metric(), SimEnvironment::new(task, 1)).unwrap();
        assert_eq!(r.graph.len(), 1);
        assert!(!r.success);
        assert!(r.final_node.is_none());
    }

    #[test]
    fn oracle_modes_need_a_simulator() {
        struct Live;
        impl Environment for Live {
            fn apply(&mut self, _: &OperatorCall, _: &SearchGraph) -> Result<Outcome> {
                unimplemented!()
            }
        }
        let cfg = PolicyConfig::default().with_oracle_mode(OracleMode::TestTest);
        assert!(matches!(
            Search::new(cfg, MetricSpec::maximize("m"), Live),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn budgets_are_honoured() {
        let task = SimTask::default();
        for policy in [
            PolicyKind::Greedy,
            PolicyKind::Mcts,
            PolicyKind::Evolutionary,
        ] {
            let cfg = PolicyConfig {
                policy,
                ..PolicyConfig::default()
            }
            .with_max_nodes(40)
            .with_max_ticks(30);
            let r = run_search(cfg, task.metric(), SimEnvironment::new(task.clone(), 3)).unwrap();
            assert!(r.graph.artifact_count() <= 40);
            assert!(r.ticks <= 30);
            assert_eq!(r.tick_log.len() as u64, r.ticks);
        }
    }

    #[test]
    fn mcts_expansions_make_num_children() {
        let task = SimTask {
            bug_prob: 0.0,
            ..SimTask::default()
        };
        let cfg = PolicyConfig::mcts().with_max_nodes(25).with_max_ticks(1000);
        let r = run_search(cfg, task.metric(), SimEnvironment::new(task, 4)).unwrap();
        // without bugs every expanded node gets exactly num_children children
        for node in r.graph.nodes() {
            assert!(
                node.children.is_empty() || node.children.len() == 5,
                "{}",
                node.children.len()
            );
        }
        assert_eq!(r.graph.root().children.len(), 5);
    }

    #[test]
    fn fitness_tracks_bounds() {
        let task = SimTask::default();
        let cfg = PolicyConfig::greedy(OperatorSet::Aira).with_max_nodes(30);
        let mut s = Search::new(cfg, task.metric(), SimEnvironment::new(task, 8)).unwrap();
        s.run().unwrap();
        let norm = *s.normalization();
        for node in s.graph().nodes().iter().skip(1) {
            let f = node.fitness.unwrap();
            match node.val_score {
                Some(v) => assert!((f - norm.normalize(v).unwrap()).abs() < 1e-12),
                None => assert_eq!(f, 0.0),
            }
        }
    }
}
