use thiserror::Error;

/// Errors produced by the detection library and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive definite: eigenvalue {eigenvalue:e} is below floor {floor:e}")]
    NotPositiveDefinite { eigenvalue: f64, floor: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("dictionary needs at least {needed} targets, got {got}")]
    InsufficientDictionary { needed: usize, got: usize },

    #[error("no measurement count up to {cap} satisfies the bound")]
    Infeasible { cap: usize },

    #[error("background too strong: lambda_max {lambda_max:e} >= tolerance {threshold:e}")]
    BackgroundTooStrong { lambda_max: f64, threshold: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures caused by the numbers rather than the inputs' shape
    /// or the configuration (non-PD matrices, infeasible bounds, background
    /// beyond tolerance).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::Infeasible { .. }
                | Error::BackgroundTooStrong { .. }
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
