use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced while reading or validating on-disk inputs.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad magic at offset {offset}: expected {expected:?}, found {found:?}")]
    BadMagic {
        offset: u64,
        expected: [u8; 4],
        found: [u8; 4],
    },
    #[error("unsupported version {version} at offset {offset}")]
    UnsupportedVersion { offset: u64, version: u32 },
    #[error("malformed header at offset {offset}: {reason}")]
    Header { offset: u64, reason: String },
    #[error("truncated {what} at offset {offset}: needed {needed} bytes, {available} available")]
    Truncated {
        what: &'static str,
        offset: u64,
        needed: u64,
        available: u64,
    },
    #[error("word_id {word_id} at offset {offset} is outside the vocabulary (size {vocab_size})")]
    WordOutOfRange {
        offset: u64,
        word_id: u32,
        vocab_size: usize,
    },
    #[error("invalid record at offset {offset}: {reason}")]
    Record { offset: u64, reason: String },
    #[error("{trailing} trailing bytes after the last record at offset {offset}")]
    TrailingBytes { offset: u64, trailing: u64 },
    #[error("line {line}: {reason}")]
    Tsv { line: usize, reason: String },
}

impl FormatError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        FormatError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Errors from the numerical core: shape mismatches, invalid parameters and
/// non-finite intermediates.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("non-finite value at token {index}")]
    NonFinite { index: usize },
    #[error("degenerate encoding: raw encoder output norm {norm:e} is below 1e-12")]
    DegenerateEncoding { norm: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Errors raised by the corpus store beyond file parsing.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("corpus is empty after filtering with min_count = {min_count}")]
    EmptyAfterFilter { min_count: u32 },
    #[error("min_count must be at least 1")]
    InvalidMinCount,
    #[error("document index {0} out of range")]
    NoSuchDocument(usize),
}

/// Errors raised during training.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{phase} diverged at epoch {epoch}, batch {batch}: loss is {loss}")]
    Diverged {
        phase: &'static str,
        epoch: usize,
        batch: usize,
        loss: f64,
        /// Summary of the parameter state when training aborted.
        state: String,
    },
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("gradient check failed: {parameter} has relative error {error:e} > {tolerance:e}")]
    GradientCheck {
        parameter: String,
        error: f64,
        tolerance: f64,
    },
}

/// Errors from reading or writing model checkpoints.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Invalid(String),
}

/// Errors from the mixture-posterior verification.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoremError {
    #[error("covariance is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("trial {trial} (seed {seed}) deviates by {deviation:e}, above the tolerance {tolerance:e}")]
    Failed {
        seed: u64,
        trial: usize,
        deviation: f64,
        tolerance: f64,
    },
}
