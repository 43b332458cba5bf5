//! The `gcx` command line and its HTTP query service.

pub mod cli;
pub mod error;
pub mod ops;
pub mod request;
pub mod service;

pub use cli::{run, Cli};
pub use error::{CliError, CliResult};
