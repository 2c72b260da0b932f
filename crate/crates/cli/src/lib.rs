//! The `hrir-tcn` command suite.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 runtime
//! failure, 4 partial success (some subjects or work units failed).

pub mod args;
pub mod commands;
pub mod config;

use std::fmt;

pub use args::{Cli, Command};
pub use config::RunConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;
pub const EXIT_PARTIAL: u8 = 4;

/// A problem with the invocation or its inputs rather than the run.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// How a command that did not fail outright ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Done,
    /// Some items failed; the message lists them.
    Partial(String),
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        match self {
            Outcome::Done => EXIT_OK,
            Outcome::Partial(_) => EXIT_PARTIAL,
        }
    }
}

/// Maps an error to its exit code by looking through its causes.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    use hrir_tcn_core::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_INVALID;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidArgument(_) | E::Precondition(_) | E::Dataset { .. } | E::Checkpoint { .. } => EXIT_INVALID,
                _ => EXIT_RUNTIME,
            };
        }
    }
    EXIT_RUNTIME
}
