//! File formats, stage commands and the `oxmc` command line on top of
//! `oxmc-core`.
//!
//! - [`formats`]: JSON Lines readers and writers, atomic writes
//! - [`commands`]: one function per subcommand plus `run_pipeline`
//! - [`cli`]: argument parsing and exit codes

pub mod cli;
pub mod commands;
pub mod error;
pub mod formats;

pub use error::{Result, WorkbenchError};
