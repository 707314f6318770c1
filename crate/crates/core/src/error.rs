//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error(
        "point count {count} per axis is invalid ({reason}); the implicit line systems use the \
         periodic averaging stencil (1, 2, 1)/2, which is singular for even sizes, so counts \
         must be odd and >= 3"
    )]
    InvalidPointCount { count: usize, reason: &'static str },

    #[error("domain bounds on axis {axis} are not ordered: [{lo}, {hi}]")]
    InvalidBounds { axis: char, lo: f64, hi: f64 },

    #[error("time step must be positive and finite, got {tau}")]
    InvalidTimeStep { tau: f64 },

    #[error("{name} must be positive and finite, got {value}")]
    InvalidCoefficient { name: &'static str, value: f64 },

    #[error("line length mismatch: expected {expected}, got {actual}")]
    LineLength { expected: usize, actual: usize },

    #[error("index {index} out of range for axis {axis} with {count} points")]
    IndexOutOfRange {
        axis: char,
        index: usize,
        count: usize,
    },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error(
        "averaging operator of size {n} is singular (smallest eigenvalue {min_eigenvalue:.3e}); \
         even sizes admit the eigenvalue 1 + cos(pi) = 0"
    )]
    SingularOperator { n: usize, min_eigenvalue: f64 },

    #[error("dense oracle supports sizes 3..={max}, got {n}")]
    OracleSizeCap { n: usize, max: usize },

    #[error("lattice shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: [usize; 3],
        actual: [usize; 3],
    },

    #[error("stage table assigns component {component} to more than one sweep")]
    DuplicateComponent { component: &'static str },

    #[error("sweep pairs an electric with a magnetic component; got ({electric}, {magnetic})")]
    BadSweepPair {
        electric: &'static str,
        magnetic: &'static str,
    },

    #[error("noise truncation level must be >= 1")]
    InvalidModeCount,

    #[error("noise path has {available} increments but step {requested} was requested")]
    NoisePathExhausted { requested: usize, available: usize },

    #[error("cannot coarsen {len} increments by ratio {ratio}: length not divisible")]
    IndivisibleCoarsening { len: usize, ratio: usize },

    #[error("gaussian block has {actual} entries, expected {expected}")]
    GaussianBlockSize { expected: usize, actual: usize },

    #[error("mean-square error of an empty sample set is undefined")]
    EmptySamples,

    #[error("convergence order needs positive errors, got {value}")]
    NonPositiveError { value: f64 },

    #[error("time steps must halve between rows: got {prev} followed by {next}")]
    TauNotHalved { prev: f64, next: f64 },

    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("observation hook failed at step {step}: {reason}")]
    Hook { step: usize, reason: String },

    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("oracle check failed: {failed} of {total} rows")]
    OracleCheckFailed { failed: usize, total: usize },

    #[error("csv table row {row} has {actual} cells, expected {expected}")]
    RaggedTable {
        row: usize,
        expected: usize,
        actual: usize,
    },

    #[error("malformed increment dump: {reason}")]
    BadDump { reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
