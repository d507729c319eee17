//! Library side of the `reltrace` command-line tool: run configuration,
//! subcommands and the verification suites.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod verify;

pub use error::CliError;
