use thiserror::Error;

/// Errors raised by model construction, checks and numerics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("kernel row {row} sums to {sum}, not 1")]
    NotStochastic { row: usize, sum: String },

    #[error("negative kernel entry at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize },

    #[error("state index {index} out of range for {n} states")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("measure is not invariant: (mu K)({state}) != mu({state})")]
    NotInvariant { state: usize },

    #[error("invariant measure is not unique (kernel is reducible)")]
    InvariantNotUnique,

    #[error("{what} of size {size} exceeds the cap {cap}")]
    TooLarge {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("factor map '{name}': {reason}")]
    InvalidMap { name: String, reason: String },

    #[error("factor map '{name}' has zero-mass block {block}")]
    ZeroMassBlock { name: String, block: usize },

    #[error("factor map '{name}' does not commute with the kernel: states {x} and {y} send different mass to block {block}")]
    NotCommuting {
        name: String,
        x: usize,
        y: usize,
        block: usize,
    },

    #[error("not a probability density: {0}")]
    NotDensity(String),

    #[error("function {index} is not constant on the blocks of its map (states {x}, {y})")]
    NotBlockMeasurable { index: usize, x: usize, y: usize },

    #[error("exponent c[{index}] = {value} is outside [0, 1]")]
    ExponentOutOfRange { index: usize, value: String },

    #[error("empty index set")]
    EmptySubset,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model is not reversible")]
    NotReversible,

    #[error("model is not ergodic (kernel is reducible)")]
    NotErgodic,

    #[error("function must be strictly positive (entry {index} = {value})")]
    NotPositive { index: usize, value: f64 },

    #[error("not a group: {0}")]
    NotAGroup(String),

    #[error("map '{name}' is not a homomorphism at ({a}, {b})")]
    NotHomomorphism { name: String, a: usize, b: usize },

    #[error("generating set does not generate the group")]
    NotGenerating,

    #[error("decomposition premise fails: lambda_min = {lambda_min}")]
    PremiseFails { lambda_min: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = core::result::Result<T, Error>;
