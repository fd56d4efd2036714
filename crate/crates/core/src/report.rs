//! Output files of a run.
//!
//! * `results.csv`: `#`-prefixed metadata (sequence, seed, every config key),
//!   then `frame,cx,cy,w,h,winner,executives` with 0-indexed center boxes,
//!   the winner as its feature tags and executives as `;`-separated tags.
//! * `metrics.csv`: see [`crate::metrics::metrics_csv`].
//! * `fitness.csv`: one row per executive per frame with every fitness term.
//! * `config.txt`: the configuration in the `key = value` format it was read in.
//! * `precision.dat`, `success.dat`: `threshold value` pairs for plotting.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experts::ExpertId;
use crate::geometry::BoundingBox;
use crate::metrics::{evaluate, metrics_csv, EvalCurves};
use crate::tracker::RunRecord;

pub const RESULTS_HEADER: &str = "frame,cx,cy,w,h,winner,executives";
pub const FITNESS_HEADER: &str =
    "frame,expert,mean_overlap,fluctuation,weighted_mean_overlap,weighted_fluctuation,r_pair,smoothness,r_self,fitness";

/// Paths written by [`emit_reports`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub results: PathBuf,
    pub metrics: PathBuf,
    pub fitness: PathBuf,
    pub config: PathBuf,
    pub precision_plot: PathBuf,
    pub success_plot: PathBuf,
}

pub fn results_csv(record: &RunRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# sequence = {}", record.sequence);
    for line in record.config.to_text().lines() {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "{RESULTS_HEADER}");
    for (i, b) in record.boxes.iter().enumerate() {
        let winner = record.winners[i].map(|w| w.to_string()).unwrap_or_default();
        let execs: Vec<String> = record.executives[i].iter().map(|e| e.to_string()).collect();
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{winner},{}",
            b.cx,
            b.cy,
            b.w,
            b.h,
            execs.join(";")
        );
    }
    out
}

/// Rows of a results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub boxes: Vec<BoundingBox>,
    pub winners: Vec<Option<ExpertId>>,
    pub executives: Vec<Vec<ExpertId>>,
}

pub fn parse_results_csv(text: &str) -> Result<ResultsTable> {
    let bad = |n: usize, msg: &str| Error::Format(format!("results line {}: {msg}", n + 1));
    let mut table = ResultsTable {
        boxes: Vec::new(),
        winners: Vec::new(),
        executives: Vec::new(),
    };
    let mut seen_header = false;
    for (n, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line != RESULTS_HEADER {
                return Err(bad(n, "missing column header"));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(n, "expected 7 columns"));
        }
        if f[0].parse::<usize>().ok() != Some(table.boxes.len()) {
            return Err(bad(n, "frames out of order"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n, "bad number"));
        let b = BoundingBox::new(num(f[1])?, num(f[2])?, num(f[3])?, num(f[4])?)
            .map_err(|e| bad(n, &e.to_string()))?;
        let winner = if f[5].is_empty() {
            None
        } else {
            Some(f[5].parse().map_err(|_| bad(n, "bad winner"))?)
        };
        let executives = if f[6].is_empty() {
            Vec::new()
        } else {
            f[6].split(';')
                .map(|t| t.parse().map_err(|_| bad(n, "bad executive")))
                .collect::<Result<_>>()?
        };
        table.boxes.push(b);
        table.winners.push(winner);
        table.executives.push(executives);
    }
    if !seen_header {
        return Err(Error::Format("results file has no column header".into()));
    }
    Ok(table)
}

pub fn fitness_csv(record: &RunRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{FITNESS_HEADER}");
    for (frame, rows) in record.fitness.iter().enumerate() {
        for r in rows {
            let _ = writeln!(
                out,
                "{frame},{},{},{},{},{},{},{},{},{}",
                r.expert,
                r.mean_overlap,
                r.fluctuation,
                r.weighted_mean_overlap,
                r.weighted_fluctuation,
                r.r_pair,
                r.smoothness,
                r.r_self,
                r.fitness
            );
        }
    }
    out
}

fn plot_data(thresholds: impl Iterator<Item = f64>, values: &[f64]) -> String {
    let mut out = String::new();
    for (t, v) in thresholds.zip(values) {
        let _ = writeln!(out, "{t} {v}");
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes every report of `record` into `out_dir`, creating it if needed.
pub fn emit_reports(
    record: &RunRecord,
    gt: &[BoundingBox],
    out_dir: &Path,
) -> Result<(ReportPaths, EvalCurves)> {
    let curves = evaluate(&record.boxes, gt)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let paths = ReportPaths {
        results: out_dir.join("results.csv"),
        metrics: out_dir.join("metrics.csv"),
        fitness: out_dir.join("fitness.csv"),
        config: out_dir.join("config.txt"),
        precision_plot: out_dir.join("precision.dat"),
        success_plot: out_dir.join("success.dat"),
    };
    write(&paths.results, &results_csv(record))?;
    write(&paths.metrics, &metrics_csv(&curves))?;
    write(&paths.fitness, &fitness_csv(record))?;
    write(&paths.config, &record.config.to_text())?;
    write(
        &paths.precision_plot,
        &plot_data((0..).map(|t| t as f64), &curves.precision.values),
    )?;
    write(
        &paths.success_plot,
        &plot_data(
            curves.success.thresholds.iter().copied(),
            &curves.success.values,
        ),
    )?;
    Ok((paths, curves))
}
