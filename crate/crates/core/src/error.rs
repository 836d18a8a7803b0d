//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Errors surfaced by the simulation, DSP, restoration, and model paths.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A range or velocity fell outside the configured axis extents.
    OutOfAxis {
        axis: &'static str,
        value: f64,
        limit: f64,
    },
    /// A matrix or tensor did not have the shape the operation requires.
    ShapeMismatch {
        context: String,
        expected: String,
        actual: String,
    },
    /// Configuration violates an invariant (checked at construction).
    InvalidConfig(String),
    /// An operation was asked for an unknown gesture label name.
    UnknownLabel(String),
    /// Restoration target length is shorter than the received sequence.
    TargetLenTooShort { target: usize, received: usize },
    /// `backward` was called without a matching train-mode `forward`.
    StaleCache(&'static str),
    /// A training set contained a single class where two are required.
    DegenerateDataset(String),
    /// A dataset split was empty.
    EmptySplit(&'static str),
    /// Training loss became non-finite; carries the epoch and step.
    NonFiniteLoss { epoch: usize, step: usize },
    /// Sequence bookkeeping (drop mask / nominal indices) is inconsistent.
    InvalidSequence(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::OutOfAxis { axis, value, limit } => {
                write!(f, "{axis} value {value} outside axis limit {limit}")
            }
            Error::ShapeMismatch {
                context,
                expected,
                actual,
            } => write!(f, "shape mismatch in {context}: expected {expected}, got {actual}"),
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::UnknownLabel(name) => write!(f, "unknown gesture label: {name}"),
            Error::TargetLenTooShort { target, received } => write!(
                f,
                "restore target length {target} shorter than received count {received}"
            ),
            Error::StaleCache(layer) => {
                write!(f, "backward on {layer} without a train-mode forward")
            }
            Error::DegenerateDataset(msg) => write!(f, "degenerate dataset: {msg}"),
            Error::EmptySplit(which) => write!(f, "empty {which} split"),
            Error::NonFiniteLoss { epoch, step } => {
                write!(f, "non-finite loss at epoch {epoch}, step {step}")
            }
            Error::InvalidSequence(msg) => write!(f, "invalid sequence: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
