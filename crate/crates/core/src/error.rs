use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest row {row}: {message}")]
    ManifestRow { row: usize, message: String },

    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("audio: {0}")]
    Audio(String),

    #[error("unknown backend `{0}`")]
    UnknownBackend(String),

    #[error("external backend: import required (`{0}`)")]
    ExternalBackend(String),

    #[error("backend `{0}` already registered")]
    DuplicateBackend(String),

    #[error("embedding format: {0}")]
    Format(String),

    #[error("tied levels: undefined under the ranking function (q1 = q2 = {0})")]
    TiedLevels(i32),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training: {0}")]
    Training(String),

    #[error("metric: {0}")]
    Metric(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(field: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
