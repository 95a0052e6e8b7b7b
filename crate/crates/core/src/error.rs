use alloc::string::String;

/// Errors raised by the risk-sharing library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain")]
    Domain { what: &'static str, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("weights are not on the simplex: {reason}")]
    OffSimplex { reason: &'static str },

    #[error("invalid distortion: {0}")]
    InvalidDistortion(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid retention: {0}")]
    InvalidRetention(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("quadrature did not reach tolerance after {subdivisions} subdivisions (error estimate {achieved_error:e})")]
    Quadrature {
        achieved_error: f64,
        subdivisions: usize,
    },

    #[error("initial risks are inconsistent with the optimum: aggregate slack {slack} is negative")]
    Infeasible { slack: f64 },

    #[error("oracle instance too large: {0}")]
    InstanceTooLarge(String),
}

pub type Result<T> = core::result::Result<T, Error>;
