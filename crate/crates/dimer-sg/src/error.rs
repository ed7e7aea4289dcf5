use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Point on or too close to a branch cut.
    #[error("branch cut: {0}")]
    Branch(String),

    /// A quadrature or refinement loop did not reach its tolerance.
    #[error("accuracy: {what} (estimate {estimate:.3e}, tolerance {tolerance:.1e})")]
    Accuracy {
        what: String,
        estimate: f64,
        tolerance: f64,
    },

    /// Coordinates that do not satisfy a lattice parity or integrality rule.
    #[error("parity: {0}")]
    Parity(String),

    /// Oracle refused because the request would be too expensive.
    #[error("cost guard: {0}")]
    CostGuard(String),

    /// ε schedule incompatible with the displacement.
    #[error("schedule: {0}")]
    Schedule(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn accuracy(what: impl Into<String>, estimate: f64, tolerance: f64) -> Self {
        Error::Accuracy {
            what: what.into(),
            estimate,
            tolerance,
        }
    }
}
