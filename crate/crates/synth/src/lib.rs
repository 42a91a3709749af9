//! Configuration, pipelines and experiment harness on top of `stlbo`.

pub mod case_study;
pub mod check;
pub mod config;
pub mod output;
pub mod pipeline;
pub mod sweep;

pub use case_study::{ReachAvoid, Rect};
pub use config::ProblemConfig;
pub use pipeline::{run_case_study, Pipeline, RunOutcome};
pub use sweep::{run_sweep, SweepRow, SweepSpec};

use stlbo::de::DeError;
use stlbo::gp::GpError;
use stlbo::stl::{ParseError, StlError};
use stlbo::system::SystemError;
use stlbo::ucb::SynthesisError;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    De(#[from] DeError),
    #[error(transparent)]
    Gp(#[from] GpError),
}

impl From<ParseError> for SynthError {
    fn from(e: ParseError) -> Self {
        SynthError::Stl(e.into())
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io {
        path: path.display().to_string(),
        source,
    }
}
