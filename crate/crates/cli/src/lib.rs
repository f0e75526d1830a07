//! Library side of the command-line runner, exposed so integration tests
//! can drive the commands directly.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_duality, cmd_sweep};
pub use config::{parse_config, CommandKind, RunArgs, RunSpec};
pub use error::{CliError, Result};
