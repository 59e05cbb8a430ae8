//! TOML experiment files.
//!
//! ```toml
//! [experiment]
//! name = "smoke"
//! seed = 7
//! replicates = 5
//!
//! [defaults]            # shared by every [[configs]] entry
//! operator_set = "aira"
//! budgets = { max_nodes = 40, max_hours = 6 }
//!
//! [[configs]]
//! name = "greedy"
//! policy = "greedy"
//!
//! [[configs]]
//! name = "mcts"
//! policy = "mcts"
//! mcts = { uct_c = 0.25 }
//!
//! [[tasks]]
//! kind = "sim"
//! name = "tabular"
//! success_threshold = 0.7
//! ```
//!
//! Each `[[configs]]` table is deep-merged over `[defaults]`. Budgets may be
//! given in hours (`max_hours`, `debug.max_hours`) instead of ticks. The
//! environment variables `AGENT_SEARCH_ENDPOINT` and `AGENT_SEARCH_OUTPUT_DIR`
//! override `llm.endpoint` and `experiment.output_dir`.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::experiment::{
    AnalysisOptions, ExperimentSpec, LlmConfig, NamedConfig, TaskKind, TaskSpec,
};
use crate::fitness::{Direction, MetricSpec};
use crate::llm::TaskBinding;
use crate::operators::TICKS_PER_HOUR;
use crate::search::PolicyConfig;
use crate::sim::SimTask;

pub const ENV_ENDPOINT: &str = "AGENT_SEARCH_ENDPOINT";
pub const ENV_OUTPUT_DIR: &str = "AGENT_SEARCH_OUTPUT_DIR";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ExperimentSection {
    name: String,
    seed: u64,
    replicates: usize,
    parallelism: usize,
    output_dir: Option<PathBuf>,
    checkpoint_every_ticks: u64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let spec = ExperimentSpec::new("experiment");
        ExperimentSection {
            name: spec.name,
            seed: spec.seed,
            replicates: spec.replicates,
            parallelism: spec.parallelism,
            output_dir: None,
            checkpoint_every_ticks: 0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    #[serde(default)]
    experiment: ExperimentSection,
    #[serde(default)]
    analysis: AnalysisOptions,
    #[serde(default)]
    llm: LlmConfig,
    #[serde(default)]
    defaults: Table,
    #[serde(default)]
    configs: Vec<Table>,
    #[serde(default)]
    tasks: Vec<TaskEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TaskEntry {
    Sim(SimTask),
    Live(LiveEntry),
}

#[derive(Debug, Deserialize)]
struct LiveEntry {
    name: String,
    #[serde(default = "default_metric")]
    metric: String,
    #[serde(default)]
    direction: Direction,
    success_threshold: Option<f64>,
    /// Read the task description from this file (relative to the config).
    task_desc_file: Option<PathBuf>,
    #[serde(flatten)]
    binding: TaskBinding,
}

fn default_metric() -> String {
    "score".to_string()
}

fn merge(base: &mut Table, over: &Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn hours_to_ticks(table: &mut Table, hours_key: &str, ticks_key: &str) -> Result<()> {
    if let Some(v) = table.remove(hours_key) {
        let hours = v
            .as_float()
            .or_else(|| v.as_integer().map(|i| i as f64))
            .ok_or_else(|| Error::Config(format!("`{hours_key}` must be a number")))?;
        if !(hours >= 0.0 && hours.is_finite()) {
            return Err(Error::Config(format!("`{hours_key}` must be nonnegative")));
        }
        if table.contains_key(ticks_key) {
            return Err(Error::Config(format!(
                "give either `{hours_key}` or `{ticks_key}`, not both"
            )));
        }
        table.insert(
            ticks_key.to_string(),
            Value::Integer((hours * TICKS_PER_HOUR).round() as i64),
        );
    }
    Ok(())
}

fn policy_config(defaults: &Table, entry: &Table) -> Result<NamedConfig> {
    let mut t = defaults.clone();
    merge(&mut t, entry);
    let name = match t.remove("name") {
        Some(Value::String(s)) => s,
        Some(_) => return Err(Error::Config("config `name` must be a string".into())),
        None => {
            return Err(Error::Config(
                "every [[configs]] entry needs a `name`".into(),
            ))
        }
    };
    if let Some(Value::Table(b)) = t.get_mut("budgets") {
        hours_to_ticks(b, "max_hours", "max_ticks")?;
        if let Some(Value::Table(d)) = b.get_mut("debug") {
            hours_to_ticks(d, "max_hours", "max_chain_ticks")?;
        }
    }
    let cfg: PolicyConfig = Value::Table(t)
        .try_into()
        .map_err(|e| Error::Config(format!("config `{name}`: {e}")))?;
    Ok(NamedConfig { name, cfg })
}

fn task_spec(entry: TaskEntry, base: Option<&Path>) -> Result<TaskSpec> {
    Ok(match entry {
        TaskEntry::Sim(sim) => TaskSpec::sim(sim),
        TaskEntry::Live(mut live) => {
            if let Some(file) = &live.task_desc_file {
                let path = base.map_or(file.clone(), |b| b.join(file));
                live.binding.task_desc =
                    std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            }
            TaskSpec {
                name: live.name,
                kind: TaskKind::Live {
                    binding: live.binding,
                    metric: MetricSpec {
                        name: live.metric,
                        direction: live.direction,
                        success_threshold: live.success_threshold,
                    },
                },
            }
        }
    })
}

fn build(text: &str, base: Option<&Path>) -> Result<ExperimentSpec> {
    let file: File = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut spec = ExperimentSpec::new(file.experiment.name);
    spec.seed = file.experiment.seed;
    spec.replicates = file.experiment.replicates;
    spec.parallelism = file.experiment.parallelism;
    spec.output_dir = file.experiment.output_dir;
    spec.checkpoint_every_ticks = file.experiment.checkpoint_every_ticks;
    spec.analysis = file.analysis;
    spec.llm = file.llm;
    spec.configs = if file.configs.is_empty() {
        let mut only = Table::new();
        only.insert("name".into(), Value::String("default".into()));
        vec![policy_config(&file.defaults, &only)?]
    } else {
        file.configs
            .iter()
            .map(|c| policy_config(&file.defaults, c))
            .collect::<Result<_>>()?
    };
    spec.tasks = file
        .tasks
        .into_iter()
        .map(|t| task_spec(t, base))
        .collect::<Result<_>>()?;
    Ok(spec)
}

/// Parses an experiment file without consulting the environment.
pub fn parse_experiment(text: &str) -> Result<ExperimentSpec> {
    let spec = build(text, None)?;
    spec.validate()?;
    Ok(spec)
}

/// Applies environment overrides through `lookup` (normally `std::env::var`).
pub fn apply_overrides(spec: &mut ExperimentSpec, lookup: impl Fn(&str) -> Option<String>) {
    if let Some(endpoint) = lookup(ENV_ENDPOINT) {
        spec.llm.endpoint = endpoint;
    }
    if let Some(dir) = lookup(ENV_OUTPUT_DIR) {
        spec.output_dir = Some(PathBuf::from(dir));
    }
}

/// Reads an experiment file, resolves relative paths against its directory
/// and applies environment overrides.
pub fn load_experiment(path: impl AsRef<Path>) -> Result<ExperimentSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut spec = build(&text, base)?;
    apply_overrides(&mut spec, |k| std::env::var(k).ok());
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::OperatorSet;
    use crate::search::PolicyKind;

    const FILE: &str = r#"
[experiment]
name = "smoke"
seed = 7
replicates = 3

[defaults]
operator_set = "aide"
budgets = { max_nodes = 40, max_hours = 6, debug = { max_hours = 2 } }

[[configs]]
name = "greedy"

[[configs]]
name = "mcts"
policy = "mcts"
operator_set = "aira"
mcts = { uct_c = 0.5 }
budgets = { max_nodes = 60 }

[[tasks]]
kind = "sim"
name = "easy"
success_threshold = 0.6
improve_delta = { minimal = { low = 0.0, high = 0.0 }, moderate = { low = 0.01, high = 0.02 }, advanced = { low = 0.0, high = 0.1 } }

[[tasks]]
kind = "live"
name = "house-prices"
metric = "rmse"
direction = "minimize"
success_threshold = 0.12
task_desc = "Predict sale prices."
"#;

    #[test]
    fn parses_and_merges() {
        let spec = parse_experiment(FILE).unwrap();
        assert_eq!(
            (spec.name.as_str(), spec.seed, spec.replicates),
            ("smoke", 7, 3)
        );
        let greedy = &spec.configs[0].cfg;
        assert_eq!(greedy.policy, PolicyKind::Greedy);
        assert_eq!(greedy.operator_set, OperatorSet::Aide);
        assert_eq!(greedy.budgets.max_ticks, 72);
        assert_eq!(greedy.budgets.debug.max_chain_ticks, 24);
        let mcts = &spec.configs[1].cfg;
        assert_eq!(
            (mcts.policy, mcts.operator_set),
            (PolicyKind::Mcts, OperatorSet::Aira)
        );
        assert_eq!(mcts.mcts.uct_c, 0.5);
        assert_eq!(
            mcts.mcts.num_children,
            PolicyConfig::default().mcts.num_children
        );
        assert_eq!((mcts.budgets.max_nodes, mcts.budgets.max_ticks), (60, 72));
        let TaskKind::Sim(sim) = &spec.tasks[0].kind else {
            panic!()
        };
        assert_eq!(sim.success_threshold, 0.6);
        assert_eq!(sim.bug_prob, SimTask::default().bug_prob);
        let metric = spec.tasks[1].metric();
        assert_eq!(metric.direction, Direction::Minimize);
        assert_eq!(metric.success_threshold, Some(0.12));
    }

    #[test]
    fn rejects_bad_files() {
        assert!(parse_experiment("[experiment]\nnme = 1\n").is_err());
        assert!(
            parse_experiment("[[configs]]\npolicy = \"mcts\"\n[[tasks]]\nkind = \"sim\"\n")
                .is_err()
        );
        let bad = "[[configs]]\nname = \"a\"\ngreedy = { epsilon_bug = 2.0 }\n[[tasks]]\nkind = \"sim\"\n";
        assert!(parse_experiment(bad).is_err());
        let both =
            "[defaults]\nbudgets = { max_hours = 1, max_ticks = 3 }\n[[tasks]]\nkind = \"sim\"\n";
        assert!(parse_experiment(both).is_err());
        assert!(parse_experiment("[[configs]]\nname = \"a\"\n").is_err());
    }

    #[test]
    fn environment_overrides() {
        let mut spec = parse_experiment("[[tasks]]\nkind = \"sim\"\n").unwrap();
        assert_eq!(spec.configs[0].name, "default");
        apply_overrides(&mut spec, |k| match k {
            ENV_ENDPOINT => Some("http://example.invalid/v1".into()),
            ENV_OUTPUT_DIR => Some("/tmp/out".into()),
            _ => None,
        });
        assert_eq!(spec.llm.endpoint, "http://example.invalid/v1");
        assert_eq!(spec.output_dir, Some(PathBuf::from("/tmp/out")));
    }
}
