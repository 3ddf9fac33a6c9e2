use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("keyphrase is empty after normalization")]
    EmptyKeyphrase,
    #[error("item `{item_id}` appears with two different texts")]
    ConflictingText { item_id: String },
    #[error("record for item `{item_id}` has zero frequency")]
    ZeroFrequency { item_id: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
    #[error("input sequence is empty")]
    EmptyInput,
    #[error("mean is zero")]
    ZeroMean,
    #[error("all counts are zero")]
    AllZero,
    #[error("ground-truth label set is empty")]
    EmptyGroundTruth,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("prediction for unknown item `{0}`")]
    UnknownItem(String),
    #[error("no prediction for item `{0}`")]
    MissingPrediction(String),
    #[error("instance `{0}` has no labels")]
    NoLabels(String),
    #[error("no training sequences")]
    NoSequences,
    #[error("token budget of {budget} exhausted after {keyphrases} of {k} keyphrases")]
    BudgetExhausted {
        budget: usize,
        keyphrases: usize,
        k: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
