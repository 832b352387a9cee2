use alloc::string::String;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("every document was removed by the preprocessing filters")]
    EmptyCorpus,
    #[error("expected {expected} labels (one per input line), got {got}")]
    LabelCountMismatch { expected: usize, got: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("embedding line {line}: expected {expected} values, found {found}")]
    EmbeddingDimMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("embedding line {line}: cannot parse {token:?} as a number")]
    EmbeddingParse { line: usize, token: String },
    #[error("embedding source contains no usable lines")]
    NoEmbeddingLines,
    #[error("term {0} has a zero-norm embedding; cosine similarity is undefined")]
    DegenerateVector(usize),
    #[error("topic mixture is invalid: {0}")]
    InvalidMixture(&'static str),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("non-finite loss encountered")]
    NonFinite,
    #[error("training diverged in epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
