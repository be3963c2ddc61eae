use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in {op}: {reason}")]
    Domain { op: &'static str, reason: String },
    #[error("overflow in {0}")]
    Overflow(&'static str),
    #[error("disjoint supports")]
    DisjointSupports,
    #[error("supp ψ̃ = ∅")]
    EmptySupport,
    #[error("misaligned grids: {0}")]
    Misaligned(String),
    #[error("snapshot parse error at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },
    #[error("resolution/timestep failure: {0}")]
    Numerical(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain { op, reason: reason.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
