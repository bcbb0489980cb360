//! Error taxonomy shared by the library and the CLI.
//!
//! Exit-code mapping for the CLI: configuration and usage problems map to
//! exit code 1, numerical problems (symmetry violations, indefinite
//! covariances, boundary-mass detection, non-finite accumulation) map to
//! exit code 2.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad dimensions, nonpositive parameters,
    /// malformed config files.
    #[error("configuration error: {0}")]
    Config(String),

    /// API misuse: mismatched catalog/report lengths, chain/model mixups.
    #[error("usage error: {0}")]
    Usage(String),

    /// A spectrum failed the Hermitian-symmetry gate.
    #[error(
        "Hermitian symmetry violation: residual {residual:.3e} exceeds tolerance {tolerance:.1e}"
    )]
    SymmetryViolation { residual: f64, tolerance: f64 },

    /// Non-finite values where the algebra guarantees finite ones.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The integration grid places significant posterior mass on its
    /// boundary; the bounds need widening.
    #[error(
        "integration boundary carries mass: boundary log-density {boundary_max:.3} is within \
         {margin:.1} nats of the interior maximum {interior_max:.3}; widen the gamma bounds"
    )]
    BoundaryMass {
        boundary_max: f64,
        interior_max: f64,
        margin: f64,
    },

    /// Dense-matrix oracle asked for a grid too large to factorize.
    #[error("grid too large for the dense oracle: P = {pixels} exceeds the {limit}-pixel limit")]
    DenseTooLarge { pixels: usize, limit: usize },

    /// Dense covariance failed its positive-definite factorization.
    #[error("covariance factorization failed: matrix not positive definite")]
    Definiteness,

    /// Chib density estimate requested with too short a retained chain.
    #[error("insufficient samples: {retained} retained draws, need at least {required}")]
    InsufficientSamples { retained: usize, required: usize },

    /// A confusion-experiment task failed; carries the task coordinates.
    #[error("task (true model {true_model}, replicate {replicate}, candidate {candidate}) failed: {source}")]
    Task {
        true_model: usize,
        replicate: usize,
        candidate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// CLI process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) | Error::Io(_) | Error::Json(_) => 1,
            Error::InsufficientSamples { .. } | Error::DenseTooLarge { .. } => 1,
            Error::SymmetryViolation { .. }
            | Error::Numerical(_)
            | Error::BoundaryMass { .. }
            | Error::Definiteness => 2,
            Error::Task { source, .. } => source.exit_code(),
        }
    }
}
