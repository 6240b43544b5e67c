use std::path::PathBuf;

/// Errors produced by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid force term #{index} ({group}): {reason}")]
    InvalidForceTerm {
        group: &'static str,
        index: usize,
        reason: String,
    },

    #[error("invalid force: {0}")]
    InvalidForce(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("operator not supported here: {0}")]
    UnsupportedOperator(String),

    #[error("profile violates Dirichlet condition or is malformed: {0}")]
    InvalidProfile(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("three-facet construction refused for alpha = {alpha}: no breaking for alpha <= 12")]
    RefusedNoBreaking { alpha: f64 },

    #[error("steady problem has no minimizer: {0}")]
    NoMinimizer(String),

    #[error("solver did not converge after {iterations} iterations (best residual {best_residual:.3e})")]
    NotConverged {
        iterations: usize,
        best_residual: f64,
    },

    #[error("implicit step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed certificate: discrete balance violated by {max_imbalance:.3e} at node {node}")]
    MalformedCertificate { max_imbalance: f64, node: usize },

    #[error("brute-force oracle refused: n_cells = {0} exceeds 8")]
    OracleTooLarge(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
