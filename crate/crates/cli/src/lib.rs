//! Command-line front end for `hbrisk`: every subcommand produces a CSV
//! table with `#` metadata lines.
//!
//! Exit codes: 0 success, 2 invalid input, 3 quadrature or bracketing
//! failure, 4 Monte Carlo validation failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod error;
pub mod output;
pub mod regression;

pub use error::{CliError, CliResult};
