//! Aggregate rows and their CSV / markdown rendering.

use std::fmt::Write as _;

use saea_core::optimizers::Method;
use saea_core::FunctionId;

use crate::config::Cell;
use crate::runner::ReplicateRecord;

/// Column order of the summary table.
pub const COLUMNS: [&str; 10] = [
    "method",
    "function",
    "dim",
    "noisy",
    "replicates",
    "mean_best_fitness",
    "std_best_fitness",
    "mean_true_evals",
    "mean_generations",
    "wall_ms",
];

/// Summary of one grid cell over its successful replicates. Best fitness is
/// always the noise-free value at the returned best point.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: Method,
    pub function: FunctionId,
    pub dimension: usize,
    pub noisy: bool,
    pub replicates: usize,
    pub mean_best_fitness: f64,
    /// Sample standard deviation; 0 for a single replicate.
    pub std_best_fitness: f64,
    pub mean_true_evals: f64,
    pub mean_generations: f64,
    /// Wall-clock time summed over replicates.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

impl ReportRow {
    /// Aggregates the successful records of `cell`; `None` when there are none.
    pub fn aggregate(cell: &Cell, records: &[&ReplicateRecord]) -> Option<Self> {
        let ok: Vec<_> = records.iter().filter_map(|r| r.summary.as_ref().ok()).collect();
        if ok.is_empty() {
            return None;
        }
        let best: Vec<f64> = ok.iter().map(|s| s.best_clean).collect();
        let evals: Vec<f64> = ok.iter().map(|s| s.true_evaluations as f64).collect();
        let gens: Vec<f64> = ok.iter().map(|s| s.generations as f64).collect();
        Some(ReportRow {
            method: cell.method,
            function: cell.function,
            dimension: cell.dimension,
            noisy: cell.noisy,
            replicates: ok.len(),
            mean_best_fitness: mean(&best),
            std_best_fitness: sample_std(&best),
            mean_true_evals: mean(&evals),
            mean_generations: mean(&gens),
            wall_ms: records.iter().map(|r| r.wall_ms).sum(),
        })
    }

    fn cells(&self) -> [String; 10] {
        [
            self.method.to_string(),
            self.function.to_string(),
            self.dimension.to_string(),
            self.noisy.to_string(),
            self.replicates.to_string(),
            sci3(self.mean_best_fitness),
            sci3(self.std_best_fitness),
            format!("{:.1}", self.mean_true_evals),
            format!("{:.1}", self.mean_generations),
            format!("{:.0}", self.wall_ms),
        ]
    }
}

/// `printf("%.3e")` formatting: three decimals and a signed exponent of at
/// least two digits.
pub fn sci3(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let s = format!("{v:.3e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

/// Renders `rows` as CSV (header plus one line per row) or as a pipe table
/// with the same cell values.
pub fn render_table(rows: &[ReportRow], format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str(&COLUMNS.join(","));
            out.push('\n');
            for row in rows {
                out.push_str(&row.cells().join(","));
                out.push('\n');
            }
        }
        TableFormat::Markdown => {
            let _ = writeln!(out, "| {} |", COLUMNS.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(COLUMNS.len()));
            for row in rows {
                let _ = writeln!(out, "| {} |", row.cells().join(" | "));
            }
        }
    }
    out
}
