use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hypothesis output: {0}")]
    InvalidHypothesisOutput(f64),

    #[error("invalid process spec: {0}")]
    InvalidProcessSpec(String),

    #[error("epsilon exceeds noise gap: epsilon={epsilon} > lambda_bar={lambda_bar}")]
    EpsilonExceedsNoiseGap { epsilon: f64, lambda_bar: f64 },

    #[error("tau pair does not define a single lambda_bar: tau_I={tau_i}, tau_U={tau_u}")]
    InconsistentTaus { tau_i: f64, tau_u: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty data")]
    EmptyData,

    #[error("empty selection")]
    EmptySelection,

    #[error("undefined AP: relevance has no positives")]
    UndefinedAp,

    #[error("missing oracle: {0}")]
    MissingOracle(String),

    #[error("beta={beta} outside admissible interval [{lo}, {hi}]")]
    InadmissibleBeta { beta: f64, lo: f64, hi: f64 },

    #[error("learning rate too large: training loss {0} diverged")]
    Divergence(f64),

    #[error("csv error at row {row}, column {column}: {message}")]
    CsvCell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
