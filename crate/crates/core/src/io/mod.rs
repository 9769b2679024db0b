//! Configuration files, problem drivers and output writers.

pub mod config;
pub mod driver;
pub mod output;

pub use config::{parse_config, RunConfig, TimeStep};
pub use driver::{converge, converge_to, resolve_output_dir, run_config, simulate, RunSummary};
pub use output::{
    read_diagnostics_csv, write_convergence_report, write_diagnostics_csv, write_field_snapshot, ConvergenceRow,
};
