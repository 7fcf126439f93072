//! The manufactured-solution experiment: exact solution and source, error
//! measures, convergence tables, field export, property sampling and the
//! command-line interface.

mod cli;
mod config;
mod errors;
mod exact;
mod fields;
pub mod props;
mod study;

pub use cli::cli_main;
pub use config::{parse_config, read_config_file, InitialGuess, RunConfig};
pub use errors::{error_concentration, error_quantities, grad_error_density, ErrorQuantities};
pub use exact::ExactSolution;
pub use fields::{export_fields, FieldSummary, FIELD_FILES};
pub use study::{
    eoc, eoc_rows, read_eoc_csv, run_convergence_study, solve_on, write_eoc_csv, EocRow, Level,
    LevelOutcome, Study, StudyReport, EOC_HEADER,
};
