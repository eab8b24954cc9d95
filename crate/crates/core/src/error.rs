use alloc::string::String;
use alloc::vec::Vec;

use crate::ClassId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite feature value in row {row}")]
    NonFinite { row: usize },

    #[error("class {0} appears in more than one step")]
    OverlappingSteps(ClassId),

    #[error("class {0} has no samples")]
    EmptyClass(ClassId),

    #[error("class {0} was already learned in an earlier step")]
    RepeatedClass(ClassId),

    #[error("label {0} is not a class of this batch")]
    UnknownLabel(ClassId),

    #[error("label {0} belongs to a class the learner has not seen")]
    UnseenClass(ClassId),

    #[error("learner has no classes")]
    EmptyState,

    #[error("insufficient {what}: {required} required, {available} available")]
    Capacity {
        what: String,
        required: usize,
        available: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("missing record: {0}")]
    MissingRecord(String),

    #[error("horizon {horizon} is outside 1..={steps}")]
    Horizon { horizon: usize, steps: usize },

    #[error("incomplete grid, missing cells: {}", .0.join(", "))]
    IncompleteGrid(Vec<String>),
}
