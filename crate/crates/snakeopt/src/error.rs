//! Crate-wide error type.
//!
//! One enum covers every failure surface so that callers (and the CLI's exit
//! code mapping) can match on the *kind* of failure without chasing a web of
//! per-module error types. Variants carry human-readable detail; the CLI maps
//! `Parse` to exit code 3 and `Numerical` to exit code 4.

use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All errors produced by this crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid processor description or graph operation (bad coupler, unknown
    /// qubit id, inconsistent lattice).
    Topology(String),
    /// Invalid generative-model input (bad prior, empty band, mismatched
    /// processor/characterization pairing).
    Generative(String),
    /// Estimator construction or evaluation problem (unknown variable, stale
    /// cache, unfit weight group, empty bound interval).
    Estimator(String),
    /// Optimizer misuse (invalid scope/rule combination, bad seed strategy,
    /// malformed stitch plan or heal target set).
    Optimizer(String),
    /// Malformed input file or record (JSON, CSV, benchmark line).
    Parse(String),
    /// Numerical failure: non-finite objective, singular system, or a fit
    /// that did not converge.
    Numerical(String),
    /// Filesystem failure wrapping the underlying message.
    Io(String),
}

impl Error {
    pub fn topology(msg: impl Into<String>) -> Self {
        Error::Topology(msg.into())
    }
    pub fn generative(msg: impl Into<String>) -> Self {
        Error::Generative(msg.into())
    }
    pub fn estimator(msg: impl Into<String>) -> Self {
        Error::Estimator(msg.into())
    }
    pub fn optimizer(msg: impl Into<String>) -> Self {
        Error::Optimizer(msg.into())
    }
    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
    pub fn io(msg: impl Into<String>) -> Self {
        Error::Io(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Topology(m) => write!(f, "topology: {m}"),
            Error::Generative(m) => write!(f, "generative model: {m}"),
            Error::Estimator(m) => write!(f, "estimator: {m}"),
            Error::Optimizer(m) => write!(f, "optimizer: {m}"),
            Error::Parse(m) => write!(f, "parse: {m}"),
            Error::Numerical(m) => write!(f, "numerical: {m}"),
            Error::Io(m) => write!(f, "io: {m}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
