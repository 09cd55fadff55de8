use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("integration failed at t = {time} s: {reason}")]
    Integration { time: f64, reason: String },

    #[error("fit did not converge: {0}")]
    FitFailure(String),

    #[error("quadrature did not converge (partial value {partial}): {reason}")]
    Quadrature { partial: f64, reason: String },

    #[error("no crossing found: {0}")]
    NoCrossing(String),

    #[error("scenario error:\n{}", .0.join("\n"))]
    Scenario(Vec<String>),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
