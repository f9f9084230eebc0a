use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A potential descriptor or parameter set that cannot be used.
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    /// The potential failed one of the admissibility checks.
    #[error("potential is not admissible: {0}")]
    NotAdmissible(String),

    /// An argument outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature hit its panel cap.
    #[error("quadrature did not converge for mode {mode}: {detail}")]
    Quadrature { mode: usize, detail: String },

    /// A table or mode set that does not belong to the ensemble it is used with.
    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Quadrature { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
