use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("{0} must be sorted by time")]
    Unsorted(&'static str),

    #[error("empty date range")]
    EmptyRange,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular system in {0}")]
    Singular(&'static str),

    #[error(
        "quadrature did not converge: estimate {estimate}, error estimate {error_estimate} after {evaluations} evaluations"
    )]
    Quadrature {
        estimate: f64,
        error_estimate: f64,
        evaluations: usize,
    },

    #[error("invalid model specification: {0}")]
    ModelSpec(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}
