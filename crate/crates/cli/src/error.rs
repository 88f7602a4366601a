use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("non-numeric cell at row {row}, column {col}: `{value}`")]
    NonNumericCell { row: usize, col: usize, value: String },
    #[error("label out of range at row {row}: `{value}`")]
    LabelOutOfRange { row: usize, value: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("pool exhausted: {needed} points requested, {available} left")]
    PoolExhausted { needed: usize, available: usize },
    #[error("{stage}: {source}")]
    Core {
        stage: String,
        #[source]
        source: infoquant::Error,
    },
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    /// 2 for numerical failures, 1 for everything the caller can fix.
    pub fn exit_code(&self) -> i32 {
        use infoquant::Error as E;
        match self {
            HarnessError::Core { source, .. } => match source {
                E::NotPositiveDefinite { .. }
                | E::DidNotConverge { .. }
                | E::SingularGram
                | E::DegenerateConstantInput => 2,
                _ => 1,
            },
            _ => 1,
        }
    }
}

/// Tags core errors with the stage that produced them.
pub trait Context<T> {
    fn stage(self, stage: impl Into<String>) -> Result<T>;
}

impl<T> Context<T> for std::result::Result<T, infoquant::Error> {
    fn stage(self, stage: impl Into<String>) -> Result<T> {
        self.map_err(|source| HarnessError::Core {
            stage: stage.into(),
            source,
        })
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}
