use thiserror::Error;

/// Errors produced by graph ingestion, chain construction and the metric solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("negative affinity {affinity} on edge {src} -> {dst}")]
    NegativeAffinity {
        src: String,
        dst: String,
        affinity: f64,
    },

    #[error("duplicate edge {src} -> {dst} with mismatched costs {first} and {second}")]
    CostMismatch {
        src: String,
        dst: String,
        first: f64,
        second: f64,
    },

    #[error("unknown node label '{0}'")]
    UnknownLabel(String),

    #[error("dangling node(s) with zero out-degree: {}", .0.join(", "))]
    DanglingNodes(Vec<String>),

    #[error("absorbing set must be a nonempty strict subset of the states")]
    InvalidAbsorbingSet,

    #[error("state index {0} out of range")]
    StateOutOfRange(usize),

    #[error("no absorbing state is reachable from transient state(s) {}",
            .0.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", "))]
    StrandedStates(Vec<usize>),

    #[error("I - P_TT is numerically singular (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("singular block while updating the fundamental matrix")]
    SingularBlock,

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("target is unreachable from the source: {0}")]
    UnreachableTarget(String),

    #[error("negative edge cost {cost} on {src} -> {dst}; shortest paths require nonnegative costs")]
    NegativeCost { src: String, dst: String, cost: f64 },

    #[error("invalid generator spec: {0}")]
    GeneratorSpec(String),

    #[error("could not generate a connected graph within {0} attempts")]
    GeneratorAttemptsExceeded(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
