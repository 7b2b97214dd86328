//! Crate-wide error type.
//!
//! Errors split into two families: validation failures (bad input data, bad
//! configuration, mismatched artifacts) and environment failures (I/O,
//! network). The CLI maps the former to exit code 2 and the latter to exit
//! code 3.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: duplicate node id {id}")]
    DuplicateNode { path: String, line: usize, id: u64 },

    #[error("{path}:{line}: edge endpoint {id} does not name a node")]
    DanglingEndpoint { path: String, line: usize, id: u64 },

    #[error("node id {id} out of range (graph has {count} nodes)")]
    InvalidNodeId { id: u32, count: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("non-finite value produced in {context}")]
    NonFinite { context: String },

    #[error("time split requires a timestamp on every node ({missing} missing)")]
    TimestampsMissing { missing: usize },

    #[error("sample size {requested} exceeds available {available}")]
    SampleTooLarge {
        requested: usize,
        available: usize,
    },

    #[error("matrix of order {n} exceeds the dense eigensolver cap {cap}")]
    EigensolverCap { n: usize, cap: usize },

    #[error("matrix is not symmetric (max asymmetry {max_delta:e})")]
    NotSymmetric { max_delta: f64 },

    #[error("embedding kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: String, got: String },

    #[error("fingerprint mismatch: {left} vs {right}")]
    FingerprintMismatch { left: String, right: String },

    #[error("corrupt embedding file {path}: {message}")]
    CorruptEmbedding { path: String, message: String },

    #[error("corrupt index file {path}: {message}")]
    CorruptIndex { path: String, message: String },

    #[error("constant sequence has no correlation")]
    ConstantSequence,

    #[error("rank window [{offset}, {end}) exceeds index list of length {len}")]
    RankWindow {
        offset: usize,
        end: usize,
        len: usize,
    },

    #[error("retrieval pool of {available} cannot fill k = {k}")]
    PoolTooSmall { available: usize, k: usize },

    #[error("embedding provider error: {0}")]
    Provider(String),

    #[error("generation backend error: {0}")]
    Backend(String),

    #[error("class {label:?} has no training examples")]
    EmptyClass { label: String },

    #[error("only {available} evaluation negatives available, need at least {needed}")]
    TooFewNegatives { available: usize, needed: usize },

    #[error("no generation record for node {node}")]
    MissingRecord { node: u32 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Process exit code the CLI uses for this error: 2 for validation
    /// failures, 3 for I/O and network failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Json { .. } => 3,
            Error::Provider(_) | Error::Backend(_) => 3,
            _ => 2,
        }
    }
}
