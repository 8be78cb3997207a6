use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("structural error: {0}")]
    Structure(String),

    #[error("unsupported genome schema version {0}")]
    UnsupportedVersion(u32),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("framing error: {0}")]
    Framing(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
