//! Error type shared by the whole crate.
//!
//! The command-line driver maps these variants onto process exit codes, so
//! every failure mode that a user can trigger from the outside has its own
//! variant rather than a stringly-typed message.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Rule text could not be parsed. `line` and `col` are 1-based.
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    /// The abelianization is not primitive: no power of the substitution
    /// matrix is entrywise positive.
    #[error("substitution is not primitive: {msg}")]
    NotPrimitive { msg: String },

    /// The substitution does not expand (Perron eigenvalue <= 1), so there
    /// is no solenoid to build.
    #[error("substitution is not expanding: Perron eigenvalue {lambda}")]
    NotExpanding { lambda: f64 },

    /// Collaring failed to produce a usable complex.
    #[error("collaring failure: {msg}")]
    Collar { msg: String },

    /// A numerical routine could not reach its documented tolerance.
    #[error("numerical failure in {what}: {msg}")]
    Numerical { what: String, msg: String },

    /// Inputs are structurally incompatible (mismatched alphabets, levels,
    /// dimensions).
    #[error("incompatible inputs: {msg}")]
    Mismatch { msg: String },

    /// A requested computation exceeds its feasibility bound; `estimate`
    /// describes the projected cost or the required input size.
    #[error("infeasible request: {msg} ({estimate})")]
    Infeasible { msg: String, estimate: String },

    /// An orbit or distance query cannot be answered at the represented
    /// depth (truncated solenoid coordinates, undecidable word comparison,
    /// unvisited cylinder).
    #[error("depth exhausted: {msg}")]
    Depth { msg: String },

    /// Preconditions of a theorem-backed routine are violated (for example
    /// a regularity exponent below the admissible threshold).
    #[error("precondition violated: {msg}")]
    Precondition { msg: String },

    /// An internal invariant failed. Indicates a bug, not a user error.
    #[error("internal invariant violated: {msg}")]
    Internal { msg: String },

    /// Filesystem or encoding problem in the CLI layer.
    #[error("io error: {msg}")]
    Io { msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal { msg: msg.into() }
    }

    pub fn mismatch(msg: impl Into<String>) -> Self {
        Error::Mismatch { msg: msg.into() }
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition { msg: msg.into() }
    }
}
