use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A point, length or parameter lies outside the admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("projection to the wall is not unique at y = {y} (equidistant from both walls)")]
    NonUniqueProjection { y: f64 },

    #[error("empty region: {0}")]
    EmptyRegion(String),

    /// The ordering 0 < ell < h/4 < eps/8 < h_omega is violated.
    #[error("scale constraint violated: {0}")]
    Scale(String),

    /// A length scale is smaller than two grid cells.
    #[error("scale not resolved by the grid: {0}")]
    Resolution(String),

    #[error("time step {dt} exceeds the stability limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pressure field required but not supplied")]
    MissingPressure,

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by the command line driver to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numeric,
    Scale,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Scale(_) | Error::Resolution(_) => ErrorClass::Scale,
            Error::Cfl { .. } | Error::Numerical(_) => ErrorClass::Numeric,
            _ => ErrorClass::Config,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
