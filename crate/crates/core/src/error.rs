use thiserror::Error;

/// A configuration problem, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid `{field}`: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { field: field.into(), reason: reason.into() }
    }
}

/// Trace stream decoding failure.
#[derive(Debug, Error)]
pub enum TraceError {
    #[error("truncated record at byte offset {offset}: {what}")]
    Truncated { offset: u64, what: &'static str },
    #[error("unknown record tag {tag:#04x} at byte offset {offset}")]
    UnknownTag { offset: u64, tag: u8 },
    #[error("malformed record at byte offset {offset}: {reason}")]
    Malformed { offset: u64, reason: String },
    #[error("line {line}: {reason}")]
    Json { line: usize, reason: String },
    #[error("ill-formed trace: {0}")]
    IllFormed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Compressed-entry decoding failure.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("unknown compression mode {0}")]
    BadMode(u8),
    #[error("miss count {0} out of range 1..=31")]
    BadCount(u8),
    #[error("payload holds {have} bits, {need} required")]
    ShortPayload { have: usize, need: usize },
    #[error("decoded block address {0:#x} leaves the 46-bit space")]
    OutOfRange(i128),
}

/// Graph construction and CSR file failures.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("CSR invariant violated: {0}")]
    Invalid(String),
    #[error("bad CSR file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Top-level error for running experiments.
#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
