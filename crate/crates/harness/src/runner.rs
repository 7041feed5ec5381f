//! Runs every replicate of every cell and persists the results.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use saea_core::optimizers::{RunResult, StopCriteria, TerminationReason};

use crate::config::{Cell, ExperimentConfig, ReportFormat};
use crate::error::{HarnessError, Result};
use crate::report::{render_table, sci3, ReportRow, TableFormat};

/// Per-replicate numbers that the aggregates are computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSummary {
    pub best_fitness: f64,
    pub best_clean: f64,
    pub mean_fitness: f64,
    pub true_evaluations: usize,
    pub evaluations_to_target: Option<usize>,
    pub generations: usize,
    pub termination: TerminationReason,
}

impl From<&RunResult> for ReplicateSummary {
    fn from(r: &RunResult) -> Self {
        ReplicateSummary {
            best_fitness: r.best_fitness,
            best_clean: r.best_clean,
            mean_fitness: r.mean_fitness,
            true_evaluations: r.true_evaluations,
            evaluations_to_target: r.evaluations_to_target,
            generations: r.generations,
            termination: r.termination,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplicateRecord {
    pub cell_index: usize,
    pub cell: Cell,
    pub replicate: usize,
    pub seed: u64,
    /// The summary, or a diagnostic when the run failed or panicked.
    pub summary: std::result::Result<ReplicateSummary, String>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ReportRow>,
    /// Records ordered by cell, then replicate.
    pub records: Vec<ReplicateRecord>,
}

impl ExperimentOutput {
    pub fn failures(&self) -> impl Iterator<Item = &ReplicateRecord> {
        self.records.iter().filter(|r| r.summary.is_err())
    }

    pub fn is_complete(&self) -> bool {
        self.failures().next().is_none()
    }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".to_string()
    }
}

fn run_one(cfg: &ExperimentConfig, cell_index: usize, replicate: usize) -> ReplicateRecord {
    let cell = cfg.cells[cell_index];
    let seed = cfg.seed(replicate);
    let stop = StopCriteria {
        budget: cfg.budget,
        target: cfg.target,
    };
    let start = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| -> Result<ReplicateSummary> {
        let spec = cell.spec()?;
        let method = cfg.method_config(&cell)?;
        Ok(ReplicateSummary::from(&method.run(&spec, &stop, seed)?))
    }));
    let summary = match outcome {
        Ok(Ok(s)) => Ok(s),
        Ok(Err(e)) => Err(e.to_string()),
        Err(p) => Err(format!("panicked: {}", panic_message(p))),
    };
    match &summary {
        Ok(s) => info!(
            "{} {} n={} noisy={} replicate {replicate}: best {:e} after {} evaluations",
            cell.method, cell.function, cell.dimension, cell.noisy, s.best_clean, s.true_evaluations
        ),
        Err(e) => warn!(
            "{} {} n={} noisy={} replicate {replicate} failed: {e}",
            cell.method, cell.function, cell.dimension, cell.noisy
        ),
    }
    ReplicateRecord {
        cell_index,
        cell,
        replicate,
        seed,
        summary,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

/// Runs all replicates (in parallel) and aggregates them per cell. A failing
/// replicate is recorded with its diagnostic and never stops the grid.
pub fn run_experiment(cfg: &ExperimentConfig) -> ExperimentOutput {
    let jobs: Vec<(usize, usize)> = (0..cfg.cells.len())
        .flat_map(|c| (0..cfg.replicates).map(move |r| (c, r)))
        .collect();
    let records: Vec<ReplicateRecord> = jobs.par_iter().map(|&(c, r)| run_one(cfg, c, r)).collect();
    let rows = cfg
        .cells
        .iter()
        .enumerate()
        .filter_map(|(i, cell)| {
            let mine: Vec<&ReplicateRecord> = records.iter().filter(|r| r.cell_index == i).collect();
            ReportRow::aggregate(cell, &mine)
        })
        .collect();
    ExperimentOutput { rows, records }
}

pub const RAW_COLUMNS: &str = "method,function,dim,noisy,replicate,seed,status,best_fitness,best_clean,mean_fitness,true_evals,evals_to_target,generations,termination,wall_ms,error";

/// One line per replicate with full-precision values.
pub fn render_raw(records: &[ReplicateRecord]) -> String {
    let mut out = String::from(RAW_COLUMNS);
    out.push('\n');
    for r in records {
        let head = format!(
            "{},{},{},{},{},{}",
            r.cell.method, r.cell.function, r.cell.dimension, r.cell.noisy, r.replicate, r.seed
        );
        let body = match &r.summary {
            Ok(s) => format!(
                "ok,{:e},{:e},{:e},{},{},{},{},{:.3},",
                s.best_fitness,
                s.best_clean,
                s.mean_fitness,
                s.true_evaluations,
                s.evaluations_to_target.map(|n| n.to_string()).unwrap_or_default(),
                s.generations,
                s.termination,
                r.wall_ms
            ),
            Err(e) => format!("failed,,,,,,,,{:.3},\"{}\"", r.wall_ms, e.replace('"', "'")),
        };
        out.push_str(&head);
        out.push(',');
        out.push_str(&body);
        out.push('\n');
    }
    out
}

/// Writes `summary.csv` and/or `summary.md`, `raw.csv` and, if anything
/// failed, `failures.txt` into the output directory. Returns the paths written.
pub fn write_outputs(cfg: &ExperimentConfig, output: &ExperimentOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&cfg.out).map_err(|e| HarnessError::io(&cfg.out, e))?;
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    if matches!(cfg.format, ReportFormat::Csv | ReportFormat::Both) {
        files.push((
            cfg.out.join("summary.csv"),
            render_table(&output.rows, TableFormat::Csv),
        ));
    }
    if matches!(cfg.format, ReportFormat::Markdown | ReportFormat::Both) {
        files.push((
            cfg.out.join("summary.md"),
            render_table(&output.rows, TableFormat::Markdown),
        ));
    }
    files.push((cfg.out.join("raw.csv"), render_raw(&output.records)));
    if !output.is_complete() {
        let text: String = output
            .failures()
            .map(|r| {
                format!(
                    "{} {} n={} noisy={} replicate={} seed={}: {}\n",
                    r.cell.method,
                    r.cell.function,
                    r.cell.dimension,
                    r.cell.noisy,
                    r.replicate,
                    r.seed,
                    r.summary.as_ref().err().map_or("", String::as_str)
                )
            })
            .collect();
        files.push((cfg.out.join("failures.txt"), text));
    }
    let mut written = Vec::new();
    for (path, text) in files {
        fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Mean best fitness printed the same way as the tables.
pub fn describe(row: &ReportRow) -> String {
    format!(
        "{} {} n={}{}: best {} ± {} with {:.1} true evaluations",
        row.method,
        row.function,
        row.dimension,
        if row.noisy { " (noisy)" } else { "" },
        sci3(row.mean_best_fitness),
        sci3(row.std_best_fitness),
        row.mean_true_evals
    )
}
