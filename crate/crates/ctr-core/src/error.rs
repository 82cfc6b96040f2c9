use thiserror::Error;

/// Errors produced by model construction, training, recognition and
/// evaluation.
#[derive(Debug, Error)]
pub enum CtrError {
    /// Malformed model parameters (non-stochastic rows, bad dimensions).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Bad caller input (symbol out of range, empty sequence, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// Out-of-range tuning parameter (negative beam, oversized epsilon, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Training cannot proceed (zero-probability corpus, ...).
    #[error("training error: {0}")]
    Training(String),

    /// A distribution went non-finite during reestimation.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Recognition finished without a single finite-cost hypothesis.
    #[error("no hypothesis: {0}")]
    NoHypothesis(String),

    /// An internal structure (WLR chain) failed a consistency check.
    #[error("internal corruption: {0}")]
    Corrupt(String),

    /// Evaluation protocol violation (key input missing from the run).
    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CtrError>;
