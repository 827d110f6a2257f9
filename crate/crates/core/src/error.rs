use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("moment undefined: {0}")]
    MomentUndefined(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("non-stationary parameter: Psi(1) = {psi1} >= 0")]
    NonStationary { psi1: f64 },

    #[error("parameter outside M: Psi(2) = {psi2} >= 0")]
    OutsideM { psi2: f64 },

    #[error("insufficient data: need more than {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate autocovariance (condition number {condition:e})")]
    DegenerateAutocovariance { condition: f64 },

    #[error("autocovariances outside the moment cone: {0}")]
    OutsideMomentCone(String),

    #[error("moment shape violated: {0}")]
    MomentShapeViolated(String),

    #[error("empty grid: {0}")]
    EmptyGrid(String),

    #[error("singular matrix (smallest singular value {smallest_singular_value:e})")]
    SingularMatrix { smallest_singular_value: f64 },

    #[error("all {0} replications were excluded")]
    AllReplicationsExcluded(usize),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors that come from the data or the parameter region rather than
    /// from malformed input.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::NonStationary { .. }
                | Error::OutsideM { .. }
                | Error::DegenerateAutocovariance { .. }
                | Error::OutsideMomentCone(_)
                | Error::MomentShapeViolated(_)
                | Error::EmptyGrid(_)
                | Error::SingularMatrix { .. }
                | Error::AllReplicationsExcluded(_)
                | Error::InsufficientData { .. }
                | Error::MomentUndefined(_)
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
