use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible shapes or tensor orders.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Invalid input data (not a shape problem).
    #[error("input error: {0}")]
    Input(String),

    /// Numerical failure (non-SPD system, norm underflow, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Malformed file: bad magic, version, or truncated payload.
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
