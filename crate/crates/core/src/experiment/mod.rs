//! Run configuration, the command implementations behind the CLI and the
//! verification suites they share with the tests.

pub mod checks;
mod commands;
mod config;

pub use commands::{
    breakdown_path, cmd_compactified_compare, cmd_decay_fit, cmd_simulate, cmd_sweep_epsilon, cmd_verify,
    cmd_verify_conformal, fit_columns, run_comparison, run_simulation, run_sweep, write_simulation,
    write_sweep_csv, BreakdownReport, ColumnFit, ComparisonTable, Simulation, Status, SweepEntry,
    SweepOutcome, SweepResult,
};
pub use config::{
    load_config, parse_config, ConformalSection, DataConfig, GridConfig, RunConfig, SolverSection, SweepSection,
    TimeConfig, VerifySection, ARTIFACT_VERSION,
};
