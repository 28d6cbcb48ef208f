use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("steady state is not unique (bordered system reciprocal condition {rcond:.3e})")]
    DegenerateSteadyState { rcond: f64 },

    #[error("steady-state residual {residual:.3e} exceeds tolerance")]
    SteadyStateResidual { residual: f64 },

    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    #[error("delay grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("fit did not converge: {message} (best cost {best_cost:.6e})")]
    FitDidNotConverge { message: String, best: Vec<f64>, best_cost: f64 },

    #[error("no stopband found in spectrum")]
    NoStopband,

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
