//! Scenario files and the `etc-stab` command line.

pub mod commands;
pub mod error;
pub mod locate;
pub mod output;
pub mod prepare;
pub mod scenario;

pub use error::{exit, CliError};
