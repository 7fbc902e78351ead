use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be positive: {0}")]
    ZeroDimension(&'static str),

    #[error("data length {found} does not match shape (expected {expected})")]
    DataLength { expected: usize, found: usize },

    #[error("even kernel size {0}: only odd kernel sizes are supported")]
    EvenKernel(usize),

    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },

    #[error("channel mismatch: input has {input} channels, kernel has {kernel}")]
    ChannelMismatch { input: usize, kernel: usize },

    #[error("wrong layout: expected {expected}, found {found}")]
    WrongLayout {
        expected: &'static str,
        found: &'static str,
    },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("unknown GEMM backend `{0}` (expected reference, blocked or parallel)")]
    UnknownBackend(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("method {method} does not apply to kernel size {k}")]
    NotApplicable { method: &'static str, k: usize },

    #[error("cannot allocate {bytes} bytes for layer {layer}")]
    Allocation { layer: String, bytes: u64 },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
