use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("column has no observed values")]
    NoObservedValues,

    #[error("shape mismatch at layer {layer}: expected width {expected}, found {found}")]
    Shape {
        layer: usize,
        expected: usize,
        found: usize,
    },

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("label {0} is not binary (expected 0 or 1)")]
    NonBinaryLabel(u8),

    #[error("non-finite gradient")]
    NonFiniteGradient,

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("non-finite values in {0}")]
    NonFiniteOutput(&'static str),

    #[error("degenerate labels: training data holds a single class")]
    DegenerateLabels,

    #[error("conditional GAN requires both classes")]
    SingleClassGan,

    #[error("model has not been fitted")]
    Untrained,

    #[error("forward cache does not match the network")]
    StaleCache,

    #[error("zero total-score variance: alpha is undefined")]
    ZeroVariance,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("malformed input at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteGradient
                | Error::NonFiniteLoss { .. }
                | Error::NonFiniteOutput(_)
                | Error::ZeroVariance
                | Error::StaleCache
        )
    }
}
