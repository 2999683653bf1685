//! Command-line front end for `hvi-core`: configuration files, run reports
//! and plot tables.

pub mod config;
pub mod report;
pub mod run;

pub use config::{echo_text, load_config, parse_config, ConfigError, RunConfig};
pub use run::{execute, write_artifacts, RunOutcome};
