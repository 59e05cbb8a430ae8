//! Command-line front end.
//!
//! Exit codes: 0 success, 1 some runs failed, 2 bad input.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use agent_search::config::load_experiment;
use agent_search::experiment::{aggregate, read_runs, run_experiment, AnalysisOptions};
use agent_search::export::{read_jsonl, to_dot, write_jsonl};
use agent_search::operators::OperatorSet;
use agent_search::report::{export_report, render_summary};
use agent_search::search::{OracleMode, PolicyConfig, PolicyKind, RunResult, Search};
use agent_search::sim::{SimEnvironment, SimTask};
use agent_search::Error;

#[derive(Parser)]
#[command(
    name = "agent-search",
    version,
    about = "Search policies for refinement agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file and write its reports.
    Run {
        config: PathBuf,
        /// Overrides `experiment.output_dir`.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// One search on a simulated task, printed as a summary.
    Search {
        #[arg(long, value_enum, default_value_t = PolicyArg::Greedy)]
        policy: PolicyArg,
        #[arg(long, value_enum, default_value_t = SetArg::Aira)]
        operators: SetArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 60)]
        max_nodes: usize,
        #[arg(long)]
        max_ticks: Option<u64>,
        /// TOML file with simulated task parameters.
        #[arg(long)]
        task: Option<PathBuf>,
        /// Write the graph as JSONL here.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Checkpoint here after the run (or after `--stop-at` ticks).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        stop_at: Option<u64>,
    },
    /// Resume a simulated run from a checkpoint and finish it.
    Replay {
        checkpoint: PathBuf,
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Convert an exported graph to Graphviz DOT or re-emit it as JSONL.
    ExportTree {
        graph: PathBuf,
        #[arg(long, value_enum, default_value_t = TreeFormat::Dot)]
        format: TreeFormat,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Re-aggregate `runs.jsonl` in an output directory.
    Report {
        dir: PathBuf,
        #[arg(long, default_value_t = 2000)]
        resamples: usize,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        #[arg(long, default_value_t = 20)]
        max_k: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Greedy,
    Mcts,
    Evolutionary,
}

#[derive(Clone, Copy, ValueEnum)]
enum SetArg {
    Aide,
    Aira,
}

#[derive(Clone, Copy, ValueEnum)]
enum TreeFormat {
    Dot,
    Jsonl,
}

enum Failure {
    Runs,
    Input(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

fn write_graph(path: &PathBuf, result: &RunResult) -> Result<(), Error> {
    let file = fs::File::create(path)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    write_jsonl(&result.graph, true, std::io::BufWriter::new(file))
}

fn print_result(result: &RunResult) {
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    println!(
        "nodes={} ticks={} final={} val={} test={} success={} perceived={}",
        result.graph.artifact_count(),
        result.ticks,
        result
            .final_node
            .map_or("-".to_string(), |n| n.0.to_string()),
        fmt(result.final_val),
        fmt(result.final_test),
        result.success,
        result.perceived_success
    );
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            config,
            output,
            parallelism,
            replicates,
        } => {
            let mut spec = load_experiment(&config)?;
            if output.is_some() {
                spec.output_dir = output;
            }
            if let Some(p) = parallelism {
                spec.parallelism = p;
            }
            if let Some(r) = replicates {
                spec.replicates = r;
            }
            let (report, _) = run_experiment(&spec)?;
            print!("{}", render_summary(&report));
            if let Some(dir) = &spec.output_dir {
                println!("wrote {}", dir.display());
            }
            if report.has_failures() {
                return Err(Failure::Runs);
            }
        }
        Command::Search {
            policy,
            operators,
            seed,
            max_nodes,
            max_ticks,
            task,
            graph,
            checkpoint,
            stop_at,
        } => {
            let task = match task {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
                    let t: SimTask =
                        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
                    t.validate()?;
                    t
                }
                None => SimTask::default(),
            };
            let mut cfg = PolicyConfig {
                policy: match policy {
                    PolicyArg::Greedy => PolicyKind::Greedy,
                    PolicyArg::Mcts => PolicyKind::Mcts,
                    PolicyArg::Evolutionary => PolicyKind::Evolutionary,
                },
                operator_set: match operators {
                    SetArg::Aide => OperatorSet::Aide,
                    SetArg::Aira => OperatorSet::Aira,
                },
                oracle_mode: OracleMode::ValVal,
                ..PolicyConfig::default()
            }
            .with_seed(seed)
            .with_max_nodes(max_nodes);
            if let Some(t) = max_ticks {
                cfg = cfg.with_max_ticks(t);
            }
            let metric = task.metric();
            let mut search = Search::new(cfg, metric, SimEnvironment::new(task, seed))?;
            match stop_at {
                Some(t) => search.run_until_tick(t)?,
                None => search.run()?,
            }
            if let Some(path) = &checkpoint {
                search.checkpoint(path)?;
                println!("checkpoint {} at tick {}", path.display(), search.ticks());
            }
            let result = search.result()?;
            print_result(&result);
            if let Some(path) = graph {
                write_graph(&path, &result)?;
            }
        }
        Command::Replay { checkpoint, graph } => {
            let mut search =
                Search::resume_from(&checkpoint, SimEnvironment::new(SimTask::default(), 0))?;
            search.run()?;
            let result = search.result()?;
            print_result(&result);
            if let Some(path) = graph {
                write_graph(&path, &result)?;
            }
        }
        Command::ExportTree {
            graph,
            format,
            output,
        } => {
            let file = fs::File::open(&graph)
                .map_err(|e| Error::InvalidArgument(format!("{}: {e}", graph.display())))?;
            let g = read_jsonl(std::io::BufReader::new(file))?;
            let text = match format {
                TreeFormat::Dot => to_dot(&g),
                TreeFormat::Jsonl => agent_search::export::to_jsonl(&g, true),
            };
            match output {
                Some(path) => fs::write(&path, text)
                    .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?,
                None => {
                    let _ = std::io::stdout().write_all(text.as_bytes());
                }
            }
        }
        Command::Report {
            dir,
            resamples,
            confidence,
            max_k,
        } => {
            let records = read_runs(dir.join("runs.jsonl"))?;
            let opts = AnalysisOptions {
                bootstrap_resamples: resamples,
                confidence,
                max_k,
                ..AnalysisOptions::default()
            };
            let name = dir
                .file_name()
                .map_or("report".into(), |n| n.to_string_lossy().into_owned());
            let report = aggregate(&name, &records, &opts)?;
            export_report(&report, &dir)?;
            print!("{}", render_summary(&report));
            if report.has_failures() {
                return Err(Failure::Runs);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runs) => {
            eprintln!("some runs failed; see runs.jsonl");
            ExitCode::from(1)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
