use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    /// Zero, negative or non-finite pivot; `pivot` is the original
    /// (unpermuted) unknown index.
    #[error("factorization failed at pivot {pivot} (d = {value:e})")]
    Factorization { pivot: usize, value: f64 },
    #[error("trial with pct = {pct} failed: {source}")]
    Trial { pct: f64, source: Box<Error> },
    #[error("degenerate error model: {0}")]
    DegenerateModel(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
