//! Figure sweeps, the analytic-versus-sampling validation and table output.

mod grid;
mod sweep;
mod table;
mod validation;

pub use grid::{lin_space, log_space, Metric, Preset, SweepGrid};
pub use sweep::{evaluate_cell, expected_gap_closed_form, run_sweep, run_sweeps, with_workers};
pub use table::{
    emit_table, emit_to_string, parse_json, write_csv, write_json, OutputFormat, SweepTable, TableMeta, TableRow,
    CSV_HEADER, SCHEMA_VERSION,
};
pub use validation::{
    default_validation_grid, run_validation, simulate_cell, ValidationOptions, ValidationReport, ValidationRow,
    ANALYTIC_REL_TOL, MIN_VALIDATION_CYCLES, VALIDATED_METRICS,
};

use thiserror::Error;

use crate::analytic::AnalyticError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("{n} cycles per cell is too few; need at least {required}")]
    TooFewCycles { n: usize, required: usize },
    #[error("cannot parse table: {0}")]
    Parse(String),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}
