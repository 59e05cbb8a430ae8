//! CSV export of an [`AggregateReport`].
//!
//! Every file starts with a `#schema=...` comment line followed by a header
//! row. Numbers are written in shortest round-trip form and missing values
//! as empty cells, so reading a file back gives identical values.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::{
    AggregateReport, ConfigSummary, TaskRow, TickCurve, TickPoint, TopKCurve, TopKPoint,
};

pub const SUMMARY_SCHEMA: &str = "agent-search/summary/v1";
pub const TASKS_SCHEMA: &str = "agent-search/tasks/v1";
pub const TICKS_SCHEMA: &str = "agent-search/ticks/v1";
pub const TOPK_SCHEMA: &str = "agent-search/topk/v1";

const SUMMARY_HEADER: [&str; 12] = [
    "config",
    "runs",
    "failed",
    "incomplete",
    "successes",
    "rate",
    "ci_lo",
    "ci_hi",
    "perceived_rate",
    "val_val",
    "val_test",
    "test_test",
];
const TASKS_HEADER: [&str; 8] = [
    "config",
    "task",
    "runs",
    "failed",
    "successes",
    "rate",
    "mean_final_val",
    "mean_final_test",
];
const TICKS_HEADER: [&str; 6] = [
    "tick",
    "runs",
    "mean_best_val",
    "mean_best_val_test",
    "perceived_rate",
    "actual_rate",
];
const TOPK_HEADER: [&str; 4] = ["k", "runs", "mean_topk", "mean_randomk"];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_table<W: Write>(
    mut out: W,
    schema: &str,
    header: &[&str],
    rows: Vec<Vec<String>>,
) -> Result<()> {
    writeln!(out, "#schema={schema}").map_err(|e| Error::io("<csv>", e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

fn read_table<R: Read>(input: R, schema: &str, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader
        .read_line(&mut first)
        .map_err(|e| Error::io("<csv>", e))?;
    let found = first.trim_end().strip_prefix("#schema=").unwrap_or("");
    if found != schema {
        return Err(Error::InvalidPayload(format!(
            "expected schema `{schema}`, found `{}`",
            first.trim_end()
        )));
    }
    let mut r = csv::Reader::from_reader(reader);
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(Error::InvalidPayload(format!("unexpected header {got:?}")));
    }
    r.records().map(|rec| rec.map_err(Error::from)).collect()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| Error::InvalidPayload(format!("column {i}: cannot parse `{raw}`")))
}

fn opt_field(rec: &csv::StringRecord, i: usize) -> Result<Option<f64>> {
    match rec.get(i).unwrap_or("") {
        "" => Ok(None),
        _ => field(rec, i).map(Some),
    }
}

pub fn write_summary<W: Write>(rows: &[ConfigSummary], out: W) -> Result<()> {
    let rows = rows
        .iter()
        .map(|c| {
            vec![
                c.config.clone(),
                c.runs.to_string(),
                c.failed.to_string(),
                c.incomplete.to_string(),
                c.successes.to_string(),
                c.rate.to_string(),
                c.ci_lo.to_string(),
                c.ci_hi.to_string(),
                c.perceived_rate.to_string(),
                c.val_val.to_string(),
                opt(c.val_test),
                opt(c.test_test),
            ]
        })
        .collect();
    write_table(out, SUMMARY_SCHEMA, &SUMMARY_HEADER, rows)
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<ConfigSummary>> {
    read_table(input, SUMMARY_SCHEMA, &SUMMARY_HEADER)?
        .iter()
        .map(|r| {
            Ok(ConfigSummary {
                config: field(r, 0)?,
                runs: field(r, 1)?,
                failed: field(r, 2)?,
                incomplete: field(r, 3)?,
                successes: field(r, 4)?,
                rate: field(r, 5)?,
                ci_lo: field(r, 6)?,
                ci_hi: field(r, 7)?,
                perceived_rate: field(r, 8)?,
                val_val: field(r, 9)?,
                val_test: opt_field(r, 10)?,
                test_test: opt_field(r, 11)?,
            })
        })
        .collect()
}

pub fn write_tasks<W: Write>(rows: &[TaskRow], out: W) -> Result<()> {
    let rows = rows
        .iter()
        .map(|t| {
            vec![
                t.config.clone(),
                t.task.clone(),
                t.runs.to_string(),
                t.failed.to_string(),
                t.successes.to_string(),
                t.rate.to_string(),
                opt(t.mean_final_val),
                opt(t.mean_final_test),
            ]
        })
        .collect();
    write_table(out, TASKS_SCHEMA, &TASKS_HEADER, rows)
}

pub fn read_tasks<R: Read>(input: R) -> Result<Vec<TaskRow>> {
    read_table(input, TASKS_SCHEMA, &TASKS_HEADER)?
        .iter()
        .map(|r| {
            Ok(TaskRow {
                config: field(r, 0)?,
                task: field(r, 1)?,
                runs: field(r, 2)?,
                failed: field(r, 3)?,
                successes: field(r, 4)?,
                rate: field(r, 5)?,
                mean_final_val: opt_field(r, 6)?,
                mean_final_test: opt_field(r, 7)?,
            })
        })
        .collect()
}

pub fn write_tick_curve<W: Write>(curve: &TickCurve, out: W) -> Result<()> {
    let rows = curve
        .points
        .iter()
        .map(|p| {
            vec![
                p.tick.to_string(),
                p.runs.to_string(),
                opt(p.mean_best_val),
                opt(p.mean_best_val_test),
                p.perceived_rate.to_string(),
                p.actual_rate.to_string(),
            ]
        })
        .collect();
    write_table(out, TICKS_SCHEMA, &TICKS_HEADER, rows)
}

pub fn read_tick_curve<R: Read>(config: &str, input: R) -> Result<TickCurve> {
    let points = read_table(input, TICKS_SCHEMA, &TICKS_HEADER)?
        .iter()
        .map(|r| {
            Ok(TickPoint {
                tick: field(r, 0)?,
                runs: field(r, 1)?,
                mean_best_val: opt_field(r, 2)?,
                mean_best_val_test: opt_field(r, 3)?,
                perceived_rate: field(r, 4)?,
                actual_rate: field(r, 5)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TickCurve {
        config: config.to_string(),
        points,
    })
}

pub fn write_topk_curve<W: Write>(curve: &TopKCurve, out: W) -> Result<()> {
    let rows = curve
        .points
        .iter()
        .map(|p| {
            vec![
                p.k.to_string(),
                p.runs.to_string(),
                p.mean_topk.to_string(),
                p.mean_randomk.to_string(),
            ]
        })
        .collect();
    write_table(out, TOPK_SCHEMA, &TOPK_HEADER, rows)
}

pub fn read_topk_curve<R: Read>(config: &str, input: R) -> Result<TopKCurve> {
    let points = read_table(input, TOPK_SCHEMA, &TOPK_HEADER)?
        .iter()
        .map(|r| {
            Ok(TopKPoint {
                k: field(r, 0)?,
                runs: field(r, 1)?,
                mean_topk: field(r, 2)?,
                mean_randomk: field(r, 3)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TopKCurve {
        config: config.to_string(),
        points,
    })
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(std::io::BufWriter::new(
        fs::File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io(path, e))
}

/// Paths of the files written for `report` under `dir`.
pub fn report_files(report: &AggregateReport, dir: &Path) -> Vec<PathBuf> {
    let mut files = vec![
        dir.join("report.json"),
        dir.join("summary.csv"),
        dir.join("tasks.csv"),
    ];
    for c in &report.tick_curves {
        files.push(dir.join("curves").join(format!("{}_ticks.csv", c.config)));
    }
    for c in &report.topk_curves {
        files.push(dir.join("curves").join(format!("{}_topk.csv", c.config)));
    }
    files
}

/// Writes `report.json`, `summary.csv`, `tasks.csv` and one tick and one
/// top-k curve per config under `curves/`.
pub fn export_report(report: &AggregateReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let path = dir.join("report.json");
    serde_json::to_writer_pretty(create(&path)?, report)?;
    write_summary(&report.configs, create(&dir.join("summary.csv"))?)?;
    write_tasks(&report.tasks, create(&dir.join("tasks.csv"))?)?;
    for c in &report.tick_curves {
        write_tick_curve(
            c,
            create(&dir.join("curves").join(format!("{}_ticks.csv", c.config)))?,
        )?;
    }
    for c in &report.topk_curves {
        write_topk_curve(
            c,
            create(&dir.join("curves").join(format!("{}_topk.csv", c.config)))?,
        )?;
    }
    Ok(())
}

/// Reads back the CSV files written by [`export_report`].
pub fn import_report(name: &str, dir: impl AsRef<Path>) -> Result<AggregateReport> {
    let dir = dir.as_ref();
    let mut report = AggregateReport::empty(name);
    report.configs = read_summary(open(&dir.join("summary.csv"))?)?;
    report.tasks = read_tasks(open(&dir.join("tasks.csv"))?)?;
    for c in &report.configs {
        let curves = dir.join("curves");
        let ticks = curves.join(format!("{}_ticks.csv", c.config));
        report
            .tick_curves
            .push(read_tick_curve(&c.config, open(&ticks)?)?);
        let topk = curves.join(format!("{}_topk.csv", c.config));
        report
            .topk_curves
            .push(read_topk_curve(&c.config, open(&topk)?)?);
    }
    Ok(report)
}

/// Plain-text table of the per-config summary.
pub fn render_summary(report: &AggregateReport) -> String {
    let mut out = format!(
        "{:<20} {:>5} {:>7} {:>17} {:>9} {:>8} {:>9}\n",
        "config", "runs", "rate", "95% interval", "perceived", "val/test", "test/test"
    );
    for c in &report.configs {
        let pct = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{:.1}%", 100.0 * v));
        out.push_str(&format!(
            "{:<20} {:>5} {:>7} {:>17} {:>9} {:>8} {:>9}{}\n",
            c.config,
            c.runs,
            pct(Some(c.rate)),
            format!("[{:.1}%, {:.1}%]", 100.0 * c.ci_lo, 100.0 * c.ci_hi),
            pct(Some(c.perceived_rate)),
            pct(c.val_test),
            pct(c.test_test),
            if c.incomplete {
                format!("  ({} failed)", c.failed)
            } else {
                String::new()
            }
        ));
    }
    out
}
