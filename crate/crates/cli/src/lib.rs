//! Command-line front end for the `mjp-core` simulation and inference library.

pub mod commands;
pub mod data;
pub mod error;
pub mod model_file;
pub mod output;

pub use commands::{run, Cli};
pub use error::CliError;
