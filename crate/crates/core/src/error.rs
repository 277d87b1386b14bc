//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by layout generation, file IO, numerics, and the
/// optimization loops.
#[derive(Debug, Error)]
pub enum Error {
    /// Rejection sampling could not place an entity within the attempt cap.
    #[error("placement infeasible: {0}")]
    PlacementInfeasible(String),

    /// A layout or input collection was empty where at least one element is
    /// required.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A structured file violated the documented schema.
    #[error("schema violation in field `{field}`: {message}")]
    Schema { field: String, message: String },

    /// A file could not be parsed at all.
    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// Vector or matrix dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// The covariance matrix stayed non positive definite after jitter
    /// escalation.
    #[error("covariance matrix not positive definite after jitter escalation")]
    NotPositiveDefinite,

    /// A scalar parameter was outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Files expected under a run directory were missing.
    #[error("missing run artifacts: {}", .0.join(", "))]
    MissingArtifacts(Vec<String>),

    /// An experiment run failed; names the (algorithm, seed) pair.
    #[error("run {algorithm} seed {seed} failed: {message}")]
    RunFailed {
        algorithm: String,
        seed: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
