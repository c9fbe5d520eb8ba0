//! Batch front end for the estimators: instance files in, result files out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod commands;
pub mod error;
pub mod instance;
pub mod num;

pub use app::{run, Cli};
pub use error::{CliError, ExitStatus};
