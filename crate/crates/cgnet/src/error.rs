//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value (band edges, bin counts, mismatched graph sizes, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Array/matrix dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// Input outside an operation's mathematical domain (empty signal, bad label, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Non-finite values where finite ones are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Dataset container or coefficient file failed to load or validate.
    #[error("load error: {0}")]
    Load(String),

    /// Text input (network spec, config file) failed to parse.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
