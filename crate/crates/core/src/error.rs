//! Crate-wide error type.

use std::fmt;

/// Errors produced by the aggregator pipeline.
#[derive(Debug, Clone, PartialEq)]
#[non_exhaustive]
pub enum Error {
    /// An input value was NaN/infinite or otherwise outside its domain.
    InvalidArgument(String),
    /// Two inputs that must have matching lengths or time ranges do not.
    LengthMismatch { context: &'static str, expected: usize, actual: usize },
    /// A series is too short for the requested operation.
    SeriesTooShort { needed: usize, got: usize },
    /// Units being aggregated do not share a common charge efficiency.
    HeterogeneousEfficiency { first: f64, other: f64 },
    /// Unit histories do not cover identical time ranges.
    MismatchedHistories(String),
    /// Fewer historical days than the estimator requires.
    InsufficientHistory { needed_days: usize, got_days: usize },
    /// An observed block of the covariance is singular beyond ridge repair.
    IllConditioned(String),
    /// Conditioning or sampling request does not match the model dimension.
    DimensionMismatch(String),
    /// Scenario generation for an empty remaining horizon (t = 24).
    EmptyHorizon,
    /// A scenario set violated a structural invariant.
    InvalidScenarioSet(String),
    /// `k_preserve` outside `1..=set_size`.
    KPreserveOutOfRange { k_preserve: usize, set_size: usize },
    /// A problem specification failed validation before assembly.
    InvalidSpec(String),
    /// The QP solver stopped without an optimal certificate.
    SolverFailure { status: &'static str, detail: String },
    /// A simulated day aborted; carries the failing hour and storage state.
    DayAborted { hour: u8, storage: f64, detail: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::LengthMismatch { context, expected, actual } => {
                write!(f, "length mismatch in {context}: expected {expected}, got {actual}")
            }
            Error::SeriesTooShort { needed, got } => {
                write!(f, "series too short: need at least {needed} observations, got {got}")
            }
            Error::HeterogeneousEfficiency { first, other } => write!(
                f,
                "units have different charge efficiencies ({first} vs {other}); \
                 aggregation requires a common value"
            ),
            Error::MismatchedHistories(msg) => write!(f, "mismatched unit histories: {msg}"),
            Error::InsufficientHistory { needed_days, got_days } => {
                write!(f, "insufficient history: need {needed_days} days, got {got_days}")
            }
            Error::IllConditioned(msg) => write!(f, "ill-conditioned model: {msg}"),
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::EmptyHorizon => write!(f, "no hours remain in the horizon"),
            Error::InvalidScenarioSet(msg) => write!(f, "invalid scenario set: {msg}"),
            Error::KPreserveOutOfRange { k_preserve, set_size } => {
                write!(f, "k_preserve = {k_preserve} outside 1..={set_size}")
            }
            Error::InvalidSpec(msg) => write!(f, "invalid specification: {msg}"),
            Error::SolverFailure { status, detail } => {
                write!(f, "solver failed with status {status}: {detail}")
            }
            Error::DayAborted { hour, storage, detail } => {
                write!(f, "day aborted at hour {hour} (storage {storage} kWh): {detail}")
            }
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
