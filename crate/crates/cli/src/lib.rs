//! Scenario ingestion, command dispatch and report emission for `rbsde`.

pub mod commands;
pub mod error;
pub mod expr;
pub mod num;
pub mod registry;
pub mod report;
pub mod scenario;
pub mod schemas;
pub mod suite;
pub mod tree_io;

pub use error::{exit, CliError, CliResult};
pub use scenario::{load_scenario, parse_scenario, LoadedScenario, Mode, Scenario};
