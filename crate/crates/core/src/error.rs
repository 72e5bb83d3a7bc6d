use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a documented invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An initialisation regime was paired with a root it is not defined for.
    #[error("regime error: {0}")]
    Regime(String),

    #[error("series exploded: |y_{index}| exceeded {limit:e}")]
    Explosion { index: usize, limit: f64 },

    /// Probability-zero or contrived inputs for which a quantity is undefined.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("not defined: {0}")]
    NotDefined(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that come from the data rather than from the request.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Explosion { .. }
                | Error::Degenerate(_)
                | Error::Numerical(_)
                | Error::NotDefined(_)
        )
    }
}
