//! Bounded Signal Temporal Logic: formulas, text syntax, and semantics.

mod formula;
mod parser;
mod semantics;
mod trace;

pub use formula::{Formula, Interval, Predicate, PredicateFn};
pub use parser::{parse_formula, ParseError};
pub use semantics::{check_evaluable, eval_boolean, robustness, Robustness};
pub use trace::Trace;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StlError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("trace has no samples")]
    EmptyTrace,
    #[error("trace sample {step} has dimension {found}, expected {expected}")]
    RaggedTrace {
        step: usize,
        expected: usize,
        found: usize,
    },
    #[error("formula needs {needed} samples but the trace has {len}")]
    TraceTooShort { needed: usize, len: usize },
    #[error("predicate expects output dimension {found}, trace has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}
