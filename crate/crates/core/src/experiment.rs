//! Batch runner: many seeded searches, aggregated into success rates,
//! anytime curves, top-k curves and the validation/test gap breakdown.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::export::write_jsonl;
use crate::fitness::{Direction, MetricSpec};
use crate::llm::{
    ChatClient, CommandExecutor, Executor, GenerationParams, LiveEnvironment, MockClient,
    MockExecutor, TaskBinding,
};
use crate::search::{
    select_final, topk_selection_score, OracleMode, PolicyConfig, Search, TopKStrategy,
};
use crate::sim::{SimEnvironment, SimTask};
use crate::stats::{pooled_mean, stratified_bootstrap_ci};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedConfig {
    pub name: String,
    pub cfg: PolicyConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskKind {
    Sim(SimTask),
    Live {
        binding: TaskBinding,
        metric: MetricSpec,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub kind: TaskKind,
}

impl TaskSpec {
    pub fn sim(task: SimTask) -> Self {
        TaskSpec {
            name: task.name.clone(),
            kind: TaskKind::Sim(task),
        }
    }

    pub fn metric(&self) -> MetricSpec {
        match &self.kind {
            TaskKind::Sim(t) => t.metric(),
            TaskKind::Live { metric, .. } => metric.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    #[default]
    Mock,
    Http,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutorKind {
    #[default]
    Mock,
    Python,
}

/// Model client settings for live tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub provider: Provider,
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: Option<u32>,
    pub request_timeout_secs: u64,
    pub max_context_tokens: Option<u32>,
    pub mock_bug_rate: f64,
    pub executor: ExecutorKind,
    pub python: String,
    pub workdir: Option<PathBuf>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        let params = GenerationParams::default();
        LlmConfig {
            provider: Provider::Mock,
            endpoint: "http://localhost:8000/v1".to_string(),
            model: "default".to_string(),
            temperature: params.temperature,
            top_p: params.top_p,
            max_tokens: None,
            request_timeout_secs: 600,
            max_context_tokens: None,
            mock_bug_rate: MockClient::default().bug_rate,
            executor: ExecutorKind::Mock,
            python: "python3".to_string(),
            workdir: None,
        }
    }
}

impl LlmConfig {
    pub fn params(&self) -> GenerationParams {
        GenerationParams {
            temperature: self.temperature,
            top_p: self.top_p,
            max_tokens: self.max_tokens,
        }
    }

    /// A client for one run; the mock is re-seeded per run so replicates differ.
    pub fn client(&self, run_seed: u64) -> Result<Arc<dyn ChatClient>> {
        match self.provider {
            Provider::Mock => Ok(Arc::new(MockClient {
                seed: run_seed,
                bug_rate: self.mock_bug_rate,
                think: true,
            })),
            #[cfg(feature = "http")]
            Provider::Http => Ok(Arc::new(crate::llm::HttpClient::new(
                self.endpoint.clone(),
                self.model.clone(),
                Duration::from_secs(self.request_timeout_secs),
            )?)),
            #[cfg(not(feature = "http"))]
            Provider::Http => Err(Error::Config(
                "the http provider needs the `http` feature".into(),
            )),
        }
    }

    fn executor(&self, run_dir: &Path) -> Box<dyn Executor + Send> {
        match self.executor {
            ExecutorKind::Mock => Box::new(MockExecutor),
            ExecutorKind::Python => Box::new(CommandExecutor::new(self.python.clone(), run_dir)),
        }
    }
}

impl<X: Executor + ?Sized> Executor for Box<X> {
    fn run(&self, code: &str, timeout: Duration) -> Result<crate::llm::Execution> {
        (**self).run(code, timeout)
    }
}

/// Post-processing settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisOptions {
    pub bootstrap_resamples: usize,
    pub confidence: f64,
    /// Largest k on the top-k curves.
    pub max_k: usize,
    /// Random subsets averaged per k for the random-k baseline.
    pub randomk_draws: usize,
    /// Also run a test-guided search per run to fill in the Test/Test rate.
    pub gap_analysis: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            bootstrap_resamples: 2000,
            confidence: 0.95,
            max_k: 20,
            randomk_draws: 20,
            gap_analysis: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub seed: u64,
    pub replicates: usize,
    pub parallelism: usize,
    pub configs: Vec<NamedConfig>,
    pub tasks: Vec<TaskSpec>,
    pub output_dir: Option<PathBuf>,
    pub analysis: AnalysisOptions,
    /// Checkpoint sim runs every this many ticks (0 disables).
    pub checkpoint_every_ticks: u64,
    pub llm: LlmConfig,
}

impl ExperimentSpec {
    pub fn new(name: impl Into<String>) -> Self {
        ExperimentSpec {
            name: name.into(),
            seed: 0,
            replicates: 10,
            parallelism: 1,
            configs: Vec::new(),
            tasks: Vec::new(),
            output_dir: None,
            analysis: AnalysisOptions::default(),
            checkpoint_every_ticks: 0,
            llm: LlmConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.configs.is_empty() || self.tasks.is_empty() {
            return Err(Error::Config(
                "an experiment needs at least one config and one task".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be positive".into()));
        }
        let mut names = std::collections::HashSet::new();
        for c in &self.configs {
            if !names.insert(&c.name) {
                return Err(Error::Config(format!("duplicate config name `{}`", c.name)));
            }
            c.cfg
                .validate()
                .map_err(|e| Error::Config(format!("config `{}`: {e}", c.name)))?;
        }
        let mut names = std::collections::HashSet::new();
        for t in &self.tasks {
            if !names.insert(&t.name) {
                return Err(Error::Config(format!("duplicate task name `{}`", t.name)));
            }
            if let TaskKind::Sim(sim) = &t.kind {
                sim.validate()
                    .map_err(|e| Error::Config(format!("task `{}`: {e}", t.name)))?;
            }
            let live = matches!(t.kind, TaskKind::Live { .. });
            for c in &self.configs {
                if live && c.cfg.oracle_mode != OracleMode::ValVal {
                    return Err(Error::Config(format!(
                        "config `{}` uses an oracle mode on live task `{}`",
                        c.name, t.name
                    )));
                }
            }
        }
        if self.analysis.max_k == 0 {
            return Err(Error::Config("max_k must be positive".into()));
        }
        Ok(())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one run, independent of which config runs it and of scheduling.
/// Every config therefore faces the same simulated worlds.
pub fn derive_seed(experiment_seed: u64, task_index: usize, replicate: usize) -> u64 {
    splitmix(
        splitmix(splitmix(experiment_seed) ^ task_index as u64)
            ^ (replicate as u64).wrapping_mul(0xd1b5_4a32_d192_ed03),
    )
}

pub const RUN_SCHEMA: &str = "agent-search/run/v1";

/// One line of `runs.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: String,
    pub config: String,
    pub task: String,
    pub task_index: usize,
    pub replicate: usize,
    pub seed: u64,
    pub error: Option<String>,
    pub direction: Direction,
    pub threshold: Option<f64>,
    pub final_node: Option<usize>,
    pub final_val: Option<f64>,
    pub final_test: Option<f64>,
    pub success: bool,
    pub perceived_success: bool,
    /// Success when the same graph's final node is picked by test score.
    pub val_test_success: Option<bool>,
    /// Success of a companion run guided and selected by test score.
    pub test_test_success: Option<bool>,
    pub ticks: u64,
    pub nodes: usize,
    pub valid_nodes: usize,
    pub digest: String,
    pub max_test: Option<f64>,
    pub best_latent: Option<f64>,
    pub tick_best_val: Vec<Option<f64>>,
    pub tick_best_val_test: Vec<Option<f64>>,
    pub topk: Vec<f64>,
    pub randomk: Vec<f64>,
}

impl RunRecord {
    fn failed(
        config: &str,
        task: &TaskSpec,
        task_index: usize,
        replicate: usize,
        seed: u64,
        err: &Error,
    ) -> Self {
        let metric = task.metric();
        RunRecord {
            schema: RUN_SCHEMA.to_string(),
            config: config.to_string(),
            task: task.name.clone(),
            task_index,
            replicate,
            seed,
            error: Some(err.to_string()),
            direction: metric.direction,
            threshold: metric.success_threshold,
            final_node: None,
            final_val: None,
            final_test: None,
            success: false,
            perceived_success: false,
            val_test_success: None,
            test_test_success: None,
            ticks: 0,
            nodes: 0,
            valid_nodes: 0,
            digest: String::new(),
            max_test: None,
            best_latent: None,
            tick_best_val: Vec::new(),
            tick_best_val_test: Vec::new(),
            topk: Vec::new(),
            randomk: Vec::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

fn file_stem(config: &str, task: &str, replicate: usize) -> String {
    let clean = |s: &str| -> String {
        s.chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect()
    };
    format!("{}__{}__{replicate:03}", clean(config), clean(task))
}

fn drive<E: Environment>(
    cfg: PolicyConfig,
    metric: MetricSpec,
    env: E,
    fresh: impl Fn() -> E,
    checkpoint: Option<(PathBuf, u64)>,
) -> Result<Search<E>> {
    let mut search = match &checkpoint {
        Some((path, _)) if path.exists() => Search::resume_from(path, fresh())?,
        _ => Search::new(cfg, metric, env)?,
    };
    match checkpoint {
        Some((path, every)) if every > 0 => {
            while !search.is_finished() {
                let next = search.ticks() + every;
                search.run_until_tick(next)?;
                if search.ticks() < next {
                    // the run may have stopped without flagging itself done yet
                    search.step()?;
                }
                search.checkpoint(&path)?;
            }
        }
        _ => search.run()?,
    }
    Ok(search)
}

fn curves(
    record: &mut RunRecord,
    result: &crate::search::RunResult,
    metric: &MetricSpec,
    opts: &AnalysisOptions,
    seed: u64,
) -> Result<()> {
    record.tick_best_val = result.tick_log.iter().map(|t| t.best_val).collect();
    record.tick_best_val_test = result.tick_log.iter().map(|t| t.best_val_test).collect();
    let has_tests = result.graph.valid_nodes().any(|n| n.test_score.is_some());
    if !has_tests {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ 0x746f_706b));
    for k in 1..=opts.max_k {
        record.topk.push(topk_selection_score(
            &result.graph,
            k,
            TopKStrategy::TopKByVal,
            metric,
            &mut rng,
        )?);
        let draws = opts.randomk_draws.max(1);
        let mut sum = 0.0;
        for _ in 0..draws {
            sum += topk_selection_score(&result.graph, k, TopKStrategy::RandomK, metric, &mut rng)?;
        }
        record.randomk.push(sum / draws as f64);
    }
    Ok(())
}

/// Executes one (config, task, replicate) cell.
pub fn run_one(
    spec: &ExperimentSpec,
    named: &NamedConfig,
    task_index: usize,
    replicate: usize,
) -> RunRecord {
    let task = &spec.tasks[task_index];
    let seed = derive_seed(spec.seed, task_index, replicate);
    match run_one_inner(spec, named, task, task_index, replicate, seed) {
        Ok(r) => r,
        Err(e) => RunRecord::failed(&named.name, task, task_index, replicate, seed, &e),
    }
}

fn run_one_inner(
    spec: &ExperimentSpec,
    named: &NamedConfig,
    task: &TaskSpec,
    task_index: usize,
    replicate: usize,
    seed: u64,
) -> Result<RunRecord> {
    let cfg = named.cfg.with_seed(seed);
    let metric = task.metric();
    let stem = file_stem(&named.name, &task.name, replicate);
    let checkpoint = match (&spec.output_dir, spec.checkpoint_every_ticks) {
        (Some(dir), every) if every > 0 && matches!(task.kind, TaskKind::Sim(_)) => {
            let d = dir.join("checkpoints");
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
            Some((d.join(format!("{stem}.ckpt")), every))
        }
        _ => None,
    };

    let (result, best_latent, test_test) = match &task.kind {
        TaskKind::Sim(sim) => {
            let fresh = || SimEnvironment::new(sim.clone(), seed);
            let search = drive(cfg, metric.clone(), fresh(), fresh, checkpoint)?;
            let (result, env) = search.into_parts()?;
            let test_test = if spec.analysis.gap_analysis && cfg.oracle_mode == OracleMode::ValVal {
                let guided = cfg.with_oracle_mode(OracleMode::TestTest);
                let s = drive(guided, metric.clone(), fresh(), fresh, None)?;
                Some(s.result()?.success)
            } else {
                None
            };
            (result, env.best_latent_quality(), test_test)
        }
        TaskKind::Live { binding, .. } => {
            let client = spec.llm.client(seed)?;
            let run_dir = spec
                .llm
                .workdir
                .clone()
                .or_else(|| spec.output_dir.as_ref().map(|d| d.join("work")))
                .unwrap_or_else(std::env::temp_dir)
                .join(&stem);
            let make = || {
                LiveEnvironment::new(client.clone(), spec.llm.executor(&run_dir), binding.clone())
                    .with_params(spec.llm.params())
            };
            let search = drive(cfg, metric.clone(), make(), make, None)?;
            (search.result()?, None, None)
        }
    };

    let graph = &result.graph;
    let val_test_success = match cfg.oracle_mode {
        OracleMode::ValVal if graph.valid_nodes().any(|n| n.test_score.is_some()) => Some(
            select_final(graph, OracleMode::ValTest, &metric)
                .ok()
                .and_then(|id| graph.nodes()[id.0].test_score)
                .is_some_and(|t| metric.meets_threshold(t)),
        ),
        _ => None,
    };
    let max_test = select_final(graph, OracleMode::TestTest, &metric)
        .ok()
        .and_then(|id| graph.nodes()[id.0].test_score);
    let mut record = RunRecord {
        schema: RUN_SCHEMA.to_string(),
        config: named.name.clone(),
        task: task.name.clone(),
        task_index,
        replicate,
        seed,
        error: None,
        direction: metric.direction,
        threshold: metric.success_threshold,
        final_node: result.final_node.map(|n| n.0),
        final_val: result.final_val,
        final_test: result.final_test,
        success: result.success,
        perceived_success: result.perceived_success,
        val_test_success,
        test_test_success: test_test,
        ticks: result.ticks,
        nodes: graph.artifact_count(),
        valid_nodes: graph.valid_nodes().count(),
        digest: graph.digest(),
        max_test,
        best_latent,
        tick_best_val: Vec::new(),
        tick_best_val_test: Vec::new(),
        topk: Vec::new(),
        randomk: Vec::new(),
    };
    curves(&mut record, &result, &metric, &spec.analysis, seed)?;

    if let Some(dir) = &spec.output_dir {
        let d = dir.join("graphs");
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        let path = d.join(format!("{stem}.jsonl"));
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_jsonl(graph, true, std::io::BufWriter::new(file))?;
    }
    Ok(record)
}

/// Runs every cell of the experiment on a pool of `spec.parallelism` workers.
/// Results come back in a fixed order regardless of scheduling.
pub fn run_all(spec: &ExperimentSpec) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    let mut cells = Vec::new();
    for (c, _) in spec.configs.iter().enumerate() {
        for t in 0..spec.tasks.len() {
            for r in 0..spec.replicates {
                cells.push((c, t, r));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|&(c, t, r)| run_one(spec, &spec.configs[c], t, r))
            .collect()
    }))
}

/// Runs the experiment, writes its outputs (when an output directory is set)
/// and returns the aggregate.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<(AggregateReport, Vec<RunRecord>)> {
    let records = run_all(spec)?;
    let report = aggregate(&spec.name, &records, &spec.analysis)?;
    if let Some(dir) = &spec.output_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_runs(&records, dir.join("runs.jsonl"))?;
        let path = dir.join("spec.json");
        fs::write(&path, serde_json::to_vec_pretty(spec)?).map_err(|e| Error::io(&path, e))?;
        crate::report::export_report(&report, dir)?;
    }
    Ok((report, records))
}

pub fn write_runs(records: &[RunRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_runs(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RunRecord = serde_json::from_str(&line)?;
        if record.schema != RUN_SCHEMA {
            return Err(Error::Version {
                what: "run record",
                found: 0,
                expected: 1,
            });
        }
        out.push(record);
    }
    Ok(out)
}

// ----- aggregation -------------------------------------------------------------

pub const REPORT_SCHEMA: &str = "agent-search/report/v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub config: String,
    pub runs: usize,
    pub failed: usize,
    /// Some cell has failed runs.
    pub incomplete: bool,
    pub successes: usize,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub perceived_rate: f64,
    pub val_val: f64,
    pub val_test: Option<f64>,
    pub test_test: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub config: String,
    pub task: String,
    pub runs: usize,
    pub failed: usize,
    pub successes: usize,
    pub rate: f64,
    pub mean_final_val: Option<f64>,
    pub mean_final_test: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickPoint {
    pub tick: u64,
    pub runs: usize,
    pub mean_best_val: Option<f64>,
    pub mean_best_val_test: Option<f64>,
    pub perceived_rate: f64,
    pub actual_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickCurve {
    pub config: String,
    pub points: Vec<TickPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopKPoint {
    pub k: usize,
    pub runs: usize,
    pub mean_topk: f64,
    pub mean_randomk: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopKCurve {
    pub config: String,
    pub points: Vec<TopKPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub schema: String,
    pub name: String,
    pub configs: Vec<ConfigSummary>,
    pub tasks: Vec<TaskRow>,
    pub tick_curves: Vec<TickCurve>,
    pub topk_curves: Vec<TopKCurve>,
}

impl AggregateReport {
    pub fn empty(name: impl Into<String>) -> Self {
        AggregateReport {
            schema: REPORT_SCHEMA.to_string(),
            name: name.into(),
            configs: Vec::new(),
            tasks: Vec::new(),
            tick_curves: Vec::new(),
            topk_curves: Vec::new(),
        }
    }

    pub fn has_failures(&self) -> bool {
        self.configs.iter().any(|c| c.failed > 0)
    }

    pub fn config(&self, name: &str) -> Option<&ConfigSummary> {
        self.configs.iter().find(|c| c.config == name)
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, s) = xs.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| s / n as f64)
}

fn rate(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        0.0
    } else {
        flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64
    }
}

fn meets(raw: Option<f64>, direction: Direction, threshold: Option<f64>) -> bool {
    match (raw, threshold) {
        (Some(v), Some(t)) => match direction {
            Direction::Maximize => v >= t,
            Direction::Minimize => v <= t,
        },
        _ => false,
    }
}

fn tick_curve(config: &str, runs: &[&RunRecord]) -> TickCurve {
    let horizon = runs
        .iter()
        .map(|r| r.tick_best_val.len())
        .max()
        .unwrap_or(0);
    let mut points = Vec::with_capacity(horizon);
    for t in 0..horizon {
        // finished runs hold their last value
        let at = |v: &Vec<Option<f64>>| v.get(t.min(v.len().saturating_sub(1))).copied().flatten();
        let live: Vec<&&RunRecord> = runs
            .iter()
            .filter(|r| !r.tick_best_val.is_empty())
            .collect();
        let vals: Vec<Option<f64>> = live.iter().map(|r| at(&r.tick_best_val)).collect();
        let tests: Vec<Option<f64>> = live.iter().map(|r| at(&r.tick_best_val_test)).collect();
        let perceived: Vec<bool> = live
            .iter()
            .zip(&vals)
            .map(|(r, v)| meets(*v, r.direction, r.threshold))
            .collect();
        let actual: Vec<bool> = live
            .iter()
            .zip(&tests)
            .map(|(r, v)| meets(*v, r.direction, r.threshold))
            .collect();
        points.push(TickPoint {
            tick: t as u64 + 1,
            runs: live.len(),
            mean_best_val: mean(vals.iter().flatten().copied()),
            mean_best_val_test: mean(tests.iter().flatten().copied()),
            perceived_rate: rate(&perceived),
            actual_rate: rate(&actual),
        });
    }
    TickCurve {
        config: config.to_string(),
        points,
    }
}

fn topk_curve(config: &str, runs: &[&RunRecord], max_k: usize) -> TopKCurve {
    let with: Vec<&&RunRecord> = runs.iter().filter(|r| !r.topk.is_empty()).collect();
    let points = if with.is_empty() {
        Vec::new()
    } else {
        (0..max_k)
            .map(|i| TopKPoint {
                k: i + 1,
                runs: with.len(),
                mean_topk: mean(with.iter().filter_map(|r| r.topk.get(i).copied()))
                    .unwrap_or(f64::NAN),
                mean_randomk: mean(with.iter().filter_map(|r| r.randomk.get(i).copied()))
                    .unwrap_or(f64::NAN),
            })
            .collect()
    };
    TopKCurve {
        config: config.to_string(),
        points,
    }
}

/// Aggregates run records into per-config rates with stratified bootstrap
/// intervals, per-task rows and curves.
pub fn aggregate(
    name: &str,
    records: &[RunRecord],
    opts: &AnalysisOptions,
) -> Result<AggregateReport> {
    let mut report = AggregateReport::empty(name);
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.contains(&r.config.as_str()) {
            order.push(&r.config);
        }
    }
    for (ci, config) in order.iter().enumerate() {
        let runs: Vec<&RunRecord> = records.iter().filter(|r| r.config == *config).collect();
        let ok: Vec<&RunRecord> = runs.iter().copied().filter(|r| r.is_ok()).collect();
        let mut strata: BTreeMap<usize, (String, Vec<&RunRecord>, usize)> = BTreeMap::new();
        for r in &runs {
            let e = strata
                .entry(r.task_index)
                .or_insert_with(|| (r.task.clone(), Vec::new(), 0));
            if r.is_ok() {
                e.1.push(r);
            } else {
                e.2 += 1;
            }
        }
        for (task, rs, failed) in strata.values() {
            let flags: Vec<bool> = rs.iter().map(|r| r.success).collect();
            report.tasks.push(TaskRow {
                config: config.to_string(),
                task: task.clone(),
                runs: rs.len() + failed,
                failed: *failed,
                successes: flags.iter().filter(|&&b| b).count(),
                rate: rate(&flags),
                mean_final_val: mean(rs.iter().filter_map(|r| r.final_val)),
                mean_final_test: mean(rs.iter().filter_map(|r| r.final_test)),
            });
        }
        let outcomes: Vec<Vec<bool>> = strata
            .values()
            .filter(|(_, rs, _)| !rs.is_empty())
            .map(|(_, rs, _)| rs.iter().map(|r| r.success).collect())
            .collect();
        let (lo, hi) = if outcomes.is_empty() {
            (0.0, 0.0)
        } else {
            let ci = stratified_bootstrap_ci(
                &outcomes,
                opts.bootstrap_resamples,
                opts.confidence,
                splitmix(ci as u64),
            )?;
            (ci.lo, ci.hi)
        };
        let flags: Vec<bool> = ok.iter().map(|r| r.success).collect();
        let optional = |f: fn(&RunRecord) -> Option<bool>| -> Option<f64> {
            let xs: Vec<bool> = ok.iter().filter_map(|r| f(r)).collect();
            (!xs.is_empty() && xs.len() == ok.len()).then(|| rate(&xs))
        };
        let failed = runs.len() - ok.len();
        report.configs.push(ConfigSummary {
            config: config.to_string(),
            runs: runs.len(),
            failed,
            incomplete: failed > 0,
            successes: flags.iter().filter(|&&b| b).count(),
            rate: if outcomes.is_empty() {
                0.0
            } else {
                pooled_mean(
                    &outcomes
                        .iter()
                        .map(|s| s.iter().map(|&b| b as u8 as f64).collect())
                        .collect::<Vec<_>>(),
                )
            },
            ci_lo: lo,
            ci_hi: hi,
            perceived_rate: rate(&ok.iter().map(|r| r.perceived_success).collect::<Vec<_>>()),
            val_val: rate(&flags),
            val_test: optional(|r| r.val_test_success),
            test_test: optional(|r| r.test_test_success),
        });
        report.tick_curves.push(tick_curve(config, &ok));
        report.topk_curves.push(topk_curve(config, &ok, opts.max_k));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(task: SimTask, replicates: usize) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new("t");
        spec.seed = 11;
        spec.replicates = replicates;
        spec.configs.push(NamedConfig {
            name: "greedy".into(),
            cfg: PolicyConfig::default().with_max_nodes(12),
        });
        spec.tasks.push(TaskSpec::sim(task));
        spec.analysis.max_k = 4;
        spec.analysis.randomk_draws = 3;
        spec.analysis.bootstrap_resamples = 1000;
        spec
    }

    #[test]
    fn seeds_are_distinct_and_config_independent() {
        let mut seen = std::collections::HashSet::new();
        for t in 0..5 {
            for r in 0..50 {
                assert!(seen.insert(derive_seed(1, t, r)));
            }
        }
        assert_ne!(derive_seed(1, 0, 0), derive_seed(2, 0, 0));
    }

    #[test]
    fn all_succeed_and_unreachable() {
        let easy = SimTask {
            success_threshold: -10.0,
            ..SimTask::default()
        };
        let (report, _) = run_experiment(&spec(easy, 4)).unwrap();
        assert_eq!(report.configs[0].rate, 1.0);
        let impossible = SimTask {
            val_noise_sigma: 0.0,
            test_noise_sigma: 0.0,
            success_threshold: 1.5,
            ..SimTask::default()
        };
        let (report, _) = run_experiment(&spec(impossible, 4)).unwrap();
        assert_eq!(report.configs[0].rate, 0.0);
        assert!(report.configs[0].ci_lo <= report.configs[0].rate);
    }

    #[test]
    fn parallel_equals_serial() {
        let mut s = spec(SimTask::default(), 6);
        s.tasks.push(TaskSpec::sim(SimTask {
            name: "other".into(),
            bug_prob: 0.5,
            ..SimTask::default()
        }));
        let (serial, a) = run_experiment(&s).unwrap();
        s.parallelism = 4;
        let (parallel, b) = run_experiment(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(serial, parallel);
    }

    #[test]
    fn planted_outcomes() {
        let mut records = Vec::new();
        let base = RunRecord::failed(
            "c",
            &TaskSpec::sim(SimTask::default()),
            0,
            0,
            0,
            &Error::NoCandidate,
        );
        for (task, wins) in [(0usize, 3usize), (1, 7)] {
            for r in 0..10 {
                let mut rec = base.clone();
                rec.error = None;
                rec.task_index = task;
                rec.task = format!("t{task}");
                rec.replicate = r;
                rec.success = r < wins;
                records.push(rec);
            }
        }
        let report = aggregate("x", &records, &AnalysisOptions::default()).unwrap();
        assert_eq!(report.configs[0].rate, 0.5);
        assert_eq!(report.tasks[0].rate, 0.3);
        assert_eq!(report.tasks[1].rate, 0.7);
        let mut broken = records.clone();
        broken[0].error = Some("boom".into());
        let report = aggregate("x", &broken, &AnalysisOptions::default()).unwrap();
        assert!(report.configs[0].incomplete);
        assert_eq!(report.configs[0].failed, 1);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let mut s = spec(SimTask::default(), 2);
        s.tasks.push(TaskSpec {
            name: "live".into(),
            kind: TaskKind::Live {
                binding: TaskBinding::default(),
                metric: MetricSpec::maximize("cv"),
            },
        });
        s.llm.provider = Provider::Http;
        let records = run_all(&s).unwrap();
        let live: Vec<_> = records.iter().filter(|r| r.task == "live").collect();
        if cfg!(feature = "http") {
            assert_eq!(live.len(), 2);
        } else {
            assert!(live.iter().all(|r| r.error.is_some()));
            assert!(records
                .iter()
                .filter(|r| r.task != "live")
                .all(|r| r.is_ok()));
        }
    }
}
