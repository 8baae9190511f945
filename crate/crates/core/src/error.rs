use thiserror::Error;

/// Errors raised by the solver, the offline pipeline and the reduced models.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("linear solver failure: {message} (residual {residual:.3e})")]
    Solver { message: String, residual: f64 },

    #[error("matrix is numerically singular at pivot {index} (|pivot| = {pivot:.3e})")]
    Singular { index: usize, pivot: f64 },

    #[error("implicit step did not converge within {max_iters} iterations at time step {step}")]
    NonConvergence { step: usize, max_iters: usize },

    #[error("reduced saddle system is singular (N_u = {n_u}, N_lambda = {n_lambda})")]
    SingularSaddle { n_u: usize, n_lambda: usize },

    #[error("snapshot set has an empty spectrum")]
    EmptySpectrum,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
