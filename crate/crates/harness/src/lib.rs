//! Experiment grids over the surrogate-assisted optimizers: configuration,
//! replicated runs with per-replicate crash isolation, and CSV / markdown
//! reporting.

pub mod config;
pub mod error;
pub mod report;
pub mod runner;

pub use config::{apply_override, Cell, ExperimentConfig, ReportFormat, Settings};
pub use error::{HarnessError, Result};
pub use report::{render_table, ReportRow, TableFormat};
pub use runner::{run_experiment, write_outputs, ExperimentOutput, ReplicateRecord, ReplicateSummary};
