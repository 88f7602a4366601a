use thiserror::Error;

use crate::glm::GlmModel;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (cholesky failed after jitter {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("label {label} is out of range for the head")]
    LabelOutOfRange { label: String },

    #[error("MAP fit did not converge after {iters} iterations (gradient norm {grad_norm:e})")]
    DidNotConverge {
        iters: usize,
        grad_norm: f64,
        last: Box<GlmModel>,
    },

    #[error("evaluation set is empty")]
    EmptyEvalSet,

    #[error("weight sample set is empty")]
    EmptySampleSet,

    #[error("labels are required but the dataset is unlabeled")]
    MissingLabels,

    #[error("similarity matrix is singular")]
    SingularGram,

    #[error("batch size {requested} exceeds available {available}")]
    BatchTooLarge { requested: usize, available: usize },

    #[error("{count} subsets exceed the enumeration limit of {limit}")]
    TooManySubsets { count: u128, limit: u128 },

    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },

    #[error("{count} joint configurations exceed the enumeration limit of {limit}")]
    TooManyConfigurations { count: u128, limit: u128 },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("rank correlation is undefined for constant input")]
    DegenerateConstantInput,

    #[error("operation requires a categorical head")]
    UnsupportedHead,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
