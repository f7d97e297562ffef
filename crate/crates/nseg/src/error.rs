use thiserror::Error;

/// Errors raised anywhere in the segmentor pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch at {node}: {detail}")]
    ShapeMismatch { node: String, detail: String },

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("bad magic bytes: expected \"NSEG\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported model file version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("model file truncated while reading tensor `{tensor}`")]
    TruncatedTensor { tensor: String },

    #[error("model file malformed: {0}")]
    ModelFormat(String),

    #[error("transfer shape mismatch for parameters: {0}")]
    TransferMismatch(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
