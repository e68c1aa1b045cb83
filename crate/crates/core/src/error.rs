//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong while evaluating, sampling or fitting.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A truncated series did not reach the requested tolerance.
    #[error("series did not converge within {terms} terms (partial log-value {partial_log})")]
    Convergence { terms: usize, partial_log: f64 },

    /// A matrix that should lie on the Stiefel manifold does not.
    #[error("not orthonormal: max |X^T X - I| = {max_deviation:e}")]
    NotOrthonormal { max_deviation: f64 },

    /// Shapes of two operands disagree.
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    /// Singular values tie, so the signed decomposition is not unique.
    #[error("degenerate singular values: gap {gap:e} between positions {index} and {}", index + 1)]
    DegenerateSingularValues { index: usize, gap: f64 },

    /// A first-row entry of the left factor is too close to zero to fix its sign.
    #[error("sign ambiguity in column {column}: first-row entry {value:e}")]
    SignAmbiguity { column: usize, value: f64 },

    /// Only p = 1 and p = 2 are supported by the normalizing-constant code.
    #[error("unsupported dimension p = {0} (only p <= 2)")]
    UnsupportedDimension(usize),

    /// A target for the inverse of the gradient map has no finite solution.
    #[error("infeasible target: {0}")]
    Infeasible(String),

    /// An iterative solver stopped without meeting its tolerance.
    #[error("iteration limit reached after {iterations} iterations (residual {residual:e})")]
    Iteration { iterations: usize, residual: f64 },

    /// The prior mode does not exist (some modal parameter is not positive).
    #[error("prior mode does not exist: eta[{index}] = {value} <= 0")]
    NoMode { index: usize, value: f64 },

    /// Prior is improper.
    #[error("improper prior: {0}")]
    Improper(String),

    /// Spectral norm exactly on the integrability boundary.
    #[error("undetermined integrability: spectral norm of the modal matrix is 1")]
    UndeterminedIntegrability,

    /// The support interval of a conditional is empty.
    #[error("empty support interval ({lo}, {hi})")]
    EmptySupport { lo: f64, hi: f64 },

    /// Too few samples for the requested computation.
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    /// Degenerate orbit in the comet transform.
    #[error("degenerate orbit: r^2 = {r2:e}")]
    DegenerateOrbit { r2: f64 },

    /// Malformed input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(String),

    /// Invalid configuration.
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::Parse { line, message: e.to_string() }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse { line: e.line(), message: e.to_string() }
    }
}
