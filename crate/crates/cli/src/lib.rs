//! Library side of the `rcd` command-line tool: run manifests, exit-code
//! classification and the subcommand implementations.

pub mod commands;
pub mod error;
pub mod manifest;

pub use error::{CliError, CliResult};
pub use manifest::{LoadedProblem, ProblemSource, RunManifest};
