use thiserror::Error;

/// Errors raised across the construction and verification pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    /// The projection of the query point onto the common 3-plane vanishes, so
    /// nearest and farthest points on a sphere are not unique.
    #[error("degenerate projection: query point is orthogonal to the sphere plane")]
    DegenerateProjection,
}

impl Error {
    /// Numeric failures are reported separately from input problems by the CLI.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
