//! Scenario files, file formats and subcommands around `fusedpnt-core`.

pub mod commands;
pub mod error;
pub mod io;
pub mod scenario;

pub use error::{CliError, CliResult};
pub use scenario::Scenario;
