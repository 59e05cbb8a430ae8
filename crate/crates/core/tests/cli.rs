use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agent-search"))
        .args(args)
        .current_dir(cwd)
        .env_remove("AGENT_SEARCH_OUTPUT_DIR")
        .env_remove("AGENT_SEARCH_ENDPOINT")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn search_export_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let full = cli(
        &[
            "search",
            "--policy",
            "mcts",
            "--seed",
            "5",
            "--max-nodes",
            "40",
            "--graph",
            "full.jsonl",
        ],
        d,
    );
    assert!(
        full.status.success(),
        "{}",
        String::from_utf8_lossy(&full.stderr)
    );
    assert!(stdout(&full).starts_with("nodes=40 "));

    let paused = cli(
        &[
            "search",
            "--policy",
            "mcts",
            "--seed",
            "5",
            "--max-nodes",
            "40",
            "--stop-at",
            "12",
            "--checkpoint",
            "run.ckpt",
        ],
        d,
    );
    assert!(paused.status.success());
    let replay = cli(&["replay", "run.ckpt", "--graph", "replayed.jsonl"], d);
    assert!(replay.status.success());
    assert_eq!(stdout(&replay), stdout(&full));
    assert_eq!(
        std::fs::read_to_string(d.join("full.jsonl")).unwrap(),
        std::fs::read_to_string(d.join("replayed.jsonl")).unwrap()
    );

    let dot = cli(&["export-tree", "full.jsonl"], d);
    assert!(dot.status.success());
    let text = stdout(&dot);
    assert!(text.starts_with("digraph search {"));
    assert_eq!(text.matches(" -> ").count(), 40);
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("exp.toml"),
        r#"
[experiment]
name = "cli"
replicates = 3
output_dir = "out"

[analysis]
bootstrap_resamples = 1000

[defaults]
budgets = { max_nodes = 15 }

[[configs]]
name = "greedy"

[[configs]]
name = "evo"
policy = "evolutionary"

[[tasks]]
kind = "sim"
name = "t"
success_threshold = 0.6
"#,
    )
    .unwrap();
    let run = cli(&["run", "exp.toml", "--parallelism", "2"], d);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let summary = std::fs::read_to_string(d.join("out/summary.csv")).unwrap();
    assert!(summary.starts_with("#schema="));
    assert_eq!(summary.lines().count(), 4);
    assert!(d.join("out/curves/evo_topk.csv").exists());

    std::fs::remove_file(d.join("out/summary.csv")).unwrap();
    let report = cli(&["report", "out", "--resamples", "1000"], d);
    assert!(report.status.success());
    assert_eq!(
        std::fs::read_to_string(d.join("out/summary.csv")).unwrap(),
        summary
    );
    assert_eq!(stdout(&report), stdout(&run).replace("wrote out\n", ""));
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        "[experiment]\nreplicates = \"many\"\n",
    )
    .unwrap();
    for args in [
        &["run", "bad.toml"][..],
        &["run", "missing.toml"],
        &["replay", "missing.ckpt"],
        &["export-tree", "missing.jsonl"],
    ] {
        let out = cli(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
    }
}
