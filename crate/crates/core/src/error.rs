use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the condensation engine.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    EmptySample,
    QuantileOutOfRange(f64),
    NonFinite(&'static str),
    Unsorted,
    BudgetMustBePositive,
    NotConverged { iterations: usize, last_eps: f64 },
    ShapeMismatch { context: &'static str, expected: (usize, usize), found: (usize, usize) },
    InvalidDims(String),
    EmptyDataset,
    LabelOutOfRange { label: usize, classes: usize },
    BudgetExceedsClassSize { class: usize, budget: usize, available: usize },
    InvalidConfig(String),
    IndexOutOfRange { what: &'static str, index: usize, len: usize },
    BwtUndefined,
    MissingAccuracy { stage: usize, task: usize },
    ClassTooSmall { class: usize, records: usize },
    NonFiniteLoss { iteration: usize, class: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptySample => write!(f, "empty sample"),
            Error::QuantileOutOfRange(q) => write!(f, "quantile out of range: {q}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::Unsorted => write!(f, "points must be sorted ascending"),
            Error::BudgetMustBePositive => write!(f, "budget must be positive"),
            Error::NotConverged { iterations, last_eps } => write!(
                f,
                "fixed-point iteration did not converge after {iterations} iterations (last eps {last_eps:e})"
            ),
            Error::ShapeMismatch { context, expected, found } => write!(
                f,
                "shape mismatch in {context}: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::InvalidDims(msg) => write!(f, "invalid layer dimensions: {msg}"),
            Error::EmptyDataset => write!(f, "empty dataset"),
            Error::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            Error::BudgetExceedsClassSize { class, budget, available } => write!(
                f,
                "budget exceeds class size: class {class} has {available} records, budget {budget}"
            ),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::IndexOutOfRange { what, index, len } => {
                write!(f, "{what} index {index} out of range (len {len})")
            }
            Error::BwtUndefined => write!(f, "BWT undefined for a single task"),
            Error::MissingAccuracy { stage, task } => {
                write!(f, "accuracy matrix has no entry for stage {stage}, task {task}")
            }
            Error::ClassTooSmall { class, records } => write!(
                f,
                "class {class} has only {records} records, at least 3 are needed to split"
            ),
            Error::NonFiniteLoss { iteration, class } => write!(
                f,
                "non-finite loss at iteration {iteration} for class {class}"
            ),
        }
    }
}

impl core::error::Error for Error {}
