//! Library side of the nucap CLI: configuration parsing and the command
//! runners, kept callable so integration tests can drive whole runs without
//! spawning processes.

pub mod commands;
pub mod config;

pub use commands::{run, RunOutcome};
pub use config::{load_kernel, Command, ConfigError, RunConfig};
