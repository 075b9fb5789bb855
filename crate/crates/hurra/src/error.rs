//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the pipeline. Variants map onto the CLI exit-code
/// contract: `InputFormat` -> 2, `EmptyData` -> 3, `Degenerate` -> 4,
/// everything else -> 1.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file or inconsistent in-memory construction.
    #[error("input format: {0}")]
    InputFormat(String),

    /// No data left to operate on (e.g. every feature dropped).
    #[error("empty data: {0}")]
    EmptyData(String),

    /// A configuration that is syntactically fine but degenerate at run
    /// time (all-anomalous labels, window larger than the series, ...).
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Exit code for the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InputFormat(_) | Error::Csv(_) => 2,
            Error::EmptyData(_) => 3,
            Error::Degenerate(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
