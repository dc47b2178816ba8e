//! Monte-Carlo experiment driver: seeding, per-trial evaluation, sweeps,
//! CSV output and the command-line front end.

pub mod cli;
pub mod csv;
pub mod seed;
pub mod ser;
pub mod sweep;
pub mod trial;

use crate::channel::ConfigError;
use crate::oia::OiaError;
use crate::theory::TheoryError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Oia(#[from] OiaError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("trial failed after {retries} redraws: {reason}")]
    TrialFailed { retries: u32, reason: String },
    #[error("{failed} of {trials} trials failed at sweep value {sweep}, above the 0.1% budget")]
    FailureBudget {
        failed: usize,
        trials: usize,
        sweep: f64,
    },
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: usize, message: String },
}
