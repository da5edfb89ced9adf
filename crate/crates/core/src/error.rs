use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// User-supplied data failed a consistency check (hermiticity, trace, pairing).
    #[error("validation error: {0}")]
    Validation(String),

    /// Step size, grid or regime requirements are not met.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("realization {index}: {source}")]
    Realization {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by the inputs rather than by the numerics.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Domain(_) | Error::Validation(_) | Error::Config(_) => true,
            Error::Numerical(_) => false,
            Error::Realization { source, .. } => source.is_config(),
        }
    }
}
