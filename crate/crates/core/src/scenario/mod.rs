//! Scenario files, world construction, execution, verdicts and the guard matrix.

pub mod build;
pub mod builtin;
pub mod matrix;
pub mod replay;
pub mod run;
pub mod schema;

use thiserror::Error;

use crate::chain::UnknownProfile;
use crate::world::WorldError;

pub use build::{build, Deployment};
#[cfg(feature = "parallel")]
pub use matrix::run_matrix_parallel;
pub use matrix::{
    check_monotonicity, check_monotonicity_on, parse_machine_report, render_report, run_matrix, run_matrix_sequential,
    Cell, Format, Matrix, MonotonicityReport, Violation,
};
pub use replay::{replay_sentiment, SentimentReplay};
pub use run::{execute, run_scenario, Execution, Outcome, Verdict};
pub use schema::{GuardClass, GuardConfiguration, Scenario, ScenarioKind, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid {id}: {msg}")]
    Invalid { id: String, msg: String },
    #[error("unknown built-in {what} {id:?}; known: {known}")]
    UnknownBuiltin { what: &'static str, id: String, known: String },
    #[error(transparent)]
    Profile(#[from] UnknownProfile),
    #[error("world error: {0}")]
    World(#[from] WorldError),
    #[error("setup failed: {0}")]
    Setup(String),
}
