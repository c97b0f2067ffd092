use thiserror::Error;

/// Errors produced anywhere in the mesh → element → assembly → solve pipeline.
#[derive(Debug, Error)]
pub enum VemError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid contact pairing: {0}")]
    InvalidPairing(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("element construction failed on cell {cell}: {reason}")]
    Element { cell: usize, reason: String },
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("solver setup failed: {0}")]
    Setup(String),
    #[error(
        "Uzawa iteration did not converge after {iterations} iterations \
         (primal {primal:.3e}, negative multiplier {dual:.3e}, complementarity {complementarity:.3e})"
    )]
    NonConvergence {
        iterations: usize,
        primal: f64,
        dual: f64,
        complementarity: f64,
    },
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, VemError>;
