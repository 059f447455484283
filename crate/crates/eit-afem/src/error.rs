use thiserror::Error;

/// Errors reported by the toolkit.
#[derive(Debug, Error)]
pub enum EitError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("refinement closure exceeded depth {0}")]
    ClosureDepth(u32),

    #[error("conductivity out of admissible bounds [{lambda}, {}]: value {value} at vertex {vertex}", 1.0 / lambda)]
    InadmissibleConductivity {
        lambda: f64,
        value: f64,
        vertex: usize,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("line search failed after {backtracks} backtracks at iteration {iteration}")]
    LineSearch { iteration: usize, backtracks: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
