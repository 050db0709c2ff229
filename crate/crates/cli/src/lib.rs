//! Configuration, run orchestration and the verification suite for the
//! `infmodel` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod run;
pub mod verify;

pub use config::{RunConfig, SweepSpec};
pub use error::{CliError, Result};
pub use verify::{run_verify, Level, VerifyOptions, VerifyReport};
