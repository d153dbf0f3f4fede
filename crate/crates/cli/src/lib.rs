//! Command-line driver for `multiscan`: argument parsing, the run loop and
//! result manifests.

pub mod config;
pub mod manifest;
pub mod run;

pub use config::{parse_args, Command, RunConfig};
pub use run::run;
