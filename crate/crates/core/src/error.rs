use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model too large for exact enumeration: {0}")]
    EnumerationLimit(String),

    #[error("divergent integral on [0,\u{221e}): d + \u{3a3} v over hidden subset {subset:?} is {slope} \u{2265} 0")]
    DivergentIntegral { subset: Vec<usize>, slope: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
