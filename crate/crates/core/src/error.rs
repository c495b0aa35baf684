use std::path::PathBuf;

/// Errors raised anywhere in the detection pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("dataset header: {0}")]
    Header(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("artifact mismatch: {0}")]
    ArtifactMismatch(String),

    #[error("out-of-vocabulary word {0:?}")]
    OutOfVocabulary(String),

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(what: &'static str, message: impl ToString) -> Self {
        Error::Format { what, message: message.to_string() }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// Process exit status: 1 for configuration problems, 3 for numeric
    /// failures, 2 for everything else (bad or inconsistent data).
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) => 1,
            Error::Numeric(_) => 3,
            _ => 2,
        }
    }

    /// The innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
