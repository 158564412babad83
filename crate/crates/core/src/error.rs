use chrono::NaiveDate;
use shapelab_lp::LpError;
use thiserror::Error;

use crate::grid::Violation;
use crate::signals::SignalId;

/// Structural problems with a load shape or its specification.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShapeError {
    #[error("invalid flexible load spec: {0}")]
    Spec(String),
    #[error("malformed shape: {0}")]
    Malformed(String),
    #[error("bus {bus}, hour {hour}: {mw} MW is not one of the three admissible levels")]
    Level { bus: String, hour: usize, mw: i64 },
    #[error("shape energy {actual} MWh differs from the budget {expected} MWh")]
    Budget { expected: i64, actual: i64 },
    #[error("bus {bus}: shape has {ups} raised and {downs} lowered hours")]
    Structure { bus: String, ups: usize, downs: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid case: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidCase(Vec<Violation>),
    #[error("invalid scenario for {date}: {detail}")]
    InvalidScenario { date: NaiveDate, detail: String },
    #[error("{date}: dispatch infeasible{}: {detail}", .hour.map(|h| format!(" at hour {h}")).unwrap_or_default())]
    Infeasible { date: NaiveDate, hour: Option<usize>, detail: String },
    #[error("{date}: numerical failure in {context}")]
    Numerical { date: NaiveDate, context: String },
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("signal {0} is not available")]
    MissingSignal(SignalId),
    #[error("unknown zone {0}")]
    UnknownZone(String),
    #[error("unknown bus {0}")]
    UnknownBus(String),
    #[error("{file}, row {row}{}: {message}", .column.as_ref().map(|c| format!(", column {c}")).unwrap_or_default())]
    Format { file: String, row: usize, column: Option<String>, message: String },
    #[error("{0}")]
    Config(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl Error {
    pub fn format(file: impl Into<String>, row: usize, column: Option<&str>, message: impl Into<String>) -> Self {
        Error::Format { file: file.into(), row, column: column.map(str::to_owned), message: message.into() }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
