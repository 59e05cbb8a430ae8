use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{
    analyze_execution, parse_solution, ChatClient, GenerationParams, PromptContext, PromptTemplate,
    TemplateName,
};
use crate::env::{Environment, Outcome};
use crate::error::{Error, Result};
use crate::graph::{SearchGraph, Status};
use crate::operators::{OperatorCall, OperatorKind};

/// Task-specific prompt material.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskBinding {
    pub task_desc: String,
    pub data_overview: String,
    pub packages: String,
    pub gpus: String,
    pub cpus: String,
    pub execution_timeout_secs: u64,
}

impl Default for TaskBinding {
    fn default() -> Self {
        TaskBinding {
            task_desc: String::new(),
            data_overview: String::new(),
            packages: "numpy, pandas, scikit-learn, lightgbm, xgboost, torch".to_string(),
            gpus: "1".to_string(),
            cpus: "8".to_string(),
            execution_timeout_secs: 4 * 3600,
        }
    }
}

fn humanize(secs: u64) -> String {
    let plural = |n: u64, unit: &str| format!("{n} {unit}{}", if n == 1 { "" } else { "s" });
    if secs.is_multiple_of(3600) && secs > 0 {
        plural(secs / 3600, "hour")
    } else if secs.is_multiple_of(60) && secs > 0 {
        plural(secs / 60, "minute")
    } else {
        plural(secs, "second")
    }
}

impl TaskBinding {
    pub fn base_context(&self) -> PromptContext {
        [
            ("task_desc", self.task_desc.clone()),
            ("data_overview", self.data_overview.clone()),
            ("packages", self.packages.clone()),
            ("gpus", self.gpus.clone()),
            ("cpus", self.cpus.clone()),
            ("execution_timeout", humanize(self.execution_timeout_secs)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

fn fenced(code: &str) -> String {
    format!("```python\n{code}\n```")
}

/// Template and filled-in context for an operator call.
pub fn operator_prompt(
    call: &OperatorCall,
    graph: &SearchGraph,
    binding: &TaskBinding,
) -> Result<(TemplateName, PromptContext)> {
    let name = match call.kind {
        OperatorKind::Draft => TemplateName::Draft,
        OperatorKind::Improve => TemplateName::Improve,
        OperatorKind::Debug => TemplateName::Debug,
        OperatorKind::Crossover => TemplateName::Crossover,
        OperatorKind::Memory => {
            return Err(Error::InvalidArgument(
                "memory is not a language-model operator".into(),
            ))
        }
    };
    let mut ctx = binding.base_context();
    ctx.insert("memory".into(), call.memory.render());
    let block = call
        .complexity
        .and_then(|cue| super::complexity_paragraph(name, cue))
        .unwrap_or("");
    ctx.insert("complexity_block".into(), block.to_string());
    let target = |i: usize| -> Result<&crate::graph::ArtifactNode> {
        let id = *call.targets.get(i).ok_or(Error::Arity {
            kind: call.kind.as_str(),
            expected: call.kind.arity(),
            got: call.targets.len(),
        })?;
        graph.node(id)
    };
    match call.kind {
        OperatorKind::Improve => {
            let t = target(0)?;
            ctx.insert("prev_code".into(), fenced(&t.code));
            ctx.insert("prev_terminal_output".into(), t.execution.clone());
        }
        OperatorKind::Debug => {
            let t = target(0)?;
            ctx.insert("prev_buggy_code".into(), fenced(&t.code));
            ctx.insert("execution_output".into(), t.execution.clone());
        }
        OperatorKind::Crossover => {
            let (a, b) = (target(0)?, target(1)?);
            ctx.insert("prev_code".into(), fenced(&a.code));
            ctx.insert("prev_terminal_output".into(), a.execution.clone());
            ctx.insert("second_code".into(), fenced(&b.code));
            ctx.insert("second_terminal_output".into(), b.execution.clone());
        }
        _ => {}
    }
    Ok((name, ctx))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Execution {
    pub output: String,
    pub timed_out: bool,
}

/// Runs generated code.
pub trait Executor {
    fn run(&self, code: &str, timeout: Duration) -> Result<Execution>;
}

/// Interprets scripts written by [`super::MockClient`] without running them.
#[derive(Clone, Copy, Debug, Default)]
pub struct MockExecutor;

impl Executor for MockExecutor {
    fn run(&self, code: &str, _timeout: Duration) -> Result<Execution> {
        if let Some(line) = code.lines().find(|l| l.trim_start().starts_with("raise ")) {
            let err = line.trim_start().trim_start_matches("raise ");
            let (kind, msg) = err.split_once('(').unwrap_or((err, ""));
            let msg = msg.trim_end_matches(')').trim_matches('"');
            return Ok(Execution {
                output: format!("Traceback (most recent call last):\n  File \"solution.py\", line 2, in <module>\n{kind}: {msg}\n"),
                timed_out: false,
            });
        }
        let score = code
            .lines()
            .find_map(|l| l.trim().strip_prefix("score = "))
            .and_then(|v| v.trim().parse::<f64>().ok());
        Ok(Execution {
            output: score
                .map(|s| format!("5-fold CV score: {s:.6}\n"))
                .unwrap_or_default(),
            timed_out: false,
        })
    }
}

/// Runs code with an external interpreter in a working directory.
#[derive(Debug)]
pub struct CommandExecutor {
    pub program: String,
    pub workdir: PathBuf,
    counter: AtomicU64,
}

impl CommandExecutor {
    pub fn new(program: impl Into<String>, workdir: impl Into<PathBuf>) -> Self {
        CommandExecutor {
            program: program.into(),
            workdir: workdir.into(),
            counter: AtomicU64::new(0),
        }
    }
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

impl Executor for CommandExecutor {
    fn run(&self, code: &str, timeout: Duration) -> Result<Execution> {
        std::fs::create_dir_all(&self.workdir).map_err(|e| Error::io(&self.workdir, e))?;
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let script = self.workdir.join(format!("solution_{n}.py"));
        std::fs::write(&script, code).map_err(|e| Error::io(&script, e))?;
        let mut child = Command::new(&self.program)
            .arg(&script)
            .current_dir(&self.workdir)
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::io(&self.program, e))?;
        let out = drain(child.stdout.take());
        let err = drain(child.stderr.take());
        let deadline = Instant::now() + timeout;
        let mut timed_out = false;
        loop {
            if child
                .try_wait()
                .map_err(|e| Error::io(&self.program, e))?
                .is_some()
            {
                break;
            }
            if Instant::now() >= deadline {
                let _ = child.kill();
                let _ = child.wait();
                timed_out = true;
                break;
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        let mut output = out.join().unwrap_or_default();
        output.push_str(&err.join().unwrap_or_default());
        if timed_out {
            output.push_str(&format!(
                "\nTimeoutError: execution exceeded {} seconds\n",
                timeout.as_secs()
            ));
        }
        Ok(Execution { output, timed_out })
    }
}

/// Environment that asks a model for each artifact, runs it and has the
/// model judge the output.
pub struct LiveEnvironment<C, X> {
    client: C,
    executor: X,
    binding: TaskBinding,
    params: GenerationParams,
}

impl<C: ChatClient, X: Executor> LiveEnvironment<C, X> {
    pub fn new(client: C, executor: X, binding: TaskBinding) -> Self {
        LiveEnvironment {
            client,
            executor,
            binding,
            params: GenerationParams::default(),
        }
    }

    pub fn with_params(mut self, params: GenerationParams) -> Self {
        self.params = params;
        self
    }

    pub fn binding(&self) -> &TaskBinding {
        &self.binding
    }
}

impl<C: ChatClient, X: Executor> Environment for LiveEnvironment<C, X> {
    fn apply(&mut self, call: &OperatorCall, graph: &SearchGraph) -> Result<Outcome> {
        let (name, ctx) = operator_prompt(call, graph, &self.binding)?;
        let prompt = PromptTemplate::builtin(name).render(&ctx)?;
        let mut parsed = None;
        for attempt in 0..super::ANALYSIS_ATTEMPTS {
            let request = if attempt == 0 {
                prompt.clone()
            } else {
                format!("{prompt}\n\nYour previous answer had no fenced code block. Answer again in the required format.\n")
            };
            let raw = self.client.complete(&request, &self.params)?;
            if let Ok(p) = parse_solution(&raw) {
                parsed = Some(p);
                break;
            }
        }
        let Some(parsed) = parsed else {
            return Ok(Outcome {
                status: Status::Buggy,
                plan: String::new(),
                code: String::new(),
                execution: "response contained no code block".into(),
                val_score: None,
                test_score: None,
            });
        };
        let timeout = Duration::from_secs(self.binding.execution_timeout_secs);
        let execution = self.executor.run(&parsed.code, timeout)?;
        let verdict = analyze_execution(
            &self.binding.task_desc,
            &parsed.code,
            &execution.output,
            &self.client,
            &self.params,
        )?;
        let (status, val) = match (
            verdict.is_buggy || execution.timed_out,
            verdict.metric_value,
        ) {
            (false, Some(m)) => (Status::Valid, Some(m)),
            _ => (Status::Buggy, None),
        };
        Ok(Outcome {
            status,
            plan: parsed.plan,
            code: parsed.code,
            execution: execution.output,
            val_score: val,
            test_score: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitness::MetricSpec;
    use crate::llm::MockClient;
    use crate::search::{run_search, PolicyConfig, PolicyKind};

    #[test]
    fn humanized_timeouts() {
        assert_eq!(humanize(4 * 3600), "4 hours");
        assert_eq!(humanize(3600), "1 hour");
        assert_eq!(humanize(90), "90 seconds");
        assert_eq!(humanize(120), "2 minutes");
    }

    #[test]
    fn mock_executor_reads_scripts() {
        let ok = MockExecutor
            .run("score = 0.71\nprint(score)", Duration::from_secs(1))
            .unwrap();
        assert_eq!(ok.output, "5-fold CV score: 0.710000\n");
        let bad = MockExecutor
            .run(
                "score = 0.7\nraise ValueError(\"boom\")\n",
                Duration::from_secs(1),
            )
            .unwrap();
        assert!(bad.output.contains("ValueError: boom"));
    }

    #[test]
    fn mock_search_end_to_end() {
        for policy in [
            PolicyKind::Greedy,
            PolicyKind::Mcts,
            PolicyKind::Evolutionary,
        ] {
            let env =
                LiveEnvironment::new(MockClient::new(5), MockExecutor, TaskBinding::default());
            let cfg = PolicyConfig {
                policy,
                ..PolicyConfig::default()
            }
            .with_max_nodes(15);
            let r = run_search(cfg, MetricSpec::maximize("cv"), env).unwrap();
            assert_eq!(r.graph.artifact_count(), 15);
            assert!(r.final_val.is_some());
            assert!(r.graph.nodes().iter().skip(1).any(|n| n.is_buggy()));
        }
    }
}
