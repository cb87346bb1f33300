use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The RIS element count or wavelength cannot form a square half-wavelength array.
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// A node coincides with an RIS element, so the path loss is singular.
    #[error("singular geometry: node at zero distance from element {element}")]
    SingularGeometry { element: usize },

    /// The UE sampling region is empty or violates its bounds.
    #[error("invalid UE region: {0}")]
    InvalidRegion(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// Exhaustive partition search refused for too many elements.
    #[error("brute-force partition refused for N = {n} (limit {limit})")]
    TooManyElements { n: usize, limit: usize },

    /// A configuration value is out of its domain. `key` is the offending field path.
    #[error("invalid configuration at `{key}`: {reason}")]
    Config { key: String, reason: String },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
