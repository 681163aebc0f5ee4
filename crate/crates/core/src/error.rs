use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// Variants are grouped by the exit code the command line reports for them;
/// see [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("shape error: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error in {path} at byte {offset}: {message}")]
    Parse {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("schema error in dialogue '{dialogue}': {message}")]
    Schema { dialogue: String, message: String },

    #[error("label error: unknown emotion '{0}'")]
    Label(String),

    #[error("missing label: dialogue '{dialogue}' utterance {index} has no emotion")]
    MissingLabel { dialogue: String, index: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("training diverged in stage {stage}, epoch {epoch}, step {step}: loss is not finite")]
    Divergence { stage: u8, epoch: usize, step: usize },

    #[error("endpoint error: {0}")]
    Endpoint(String),

    #[error("run aborted: {0}")]
    Aborted(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialize(String),
}

/// Coarse error category, shared with the HTTP layer and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

impl ErrorKind {
    /// Process exit code: 1 user/config, 2 data, 3 runtime/divergence.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 1,
            ErrorKind::Data => 2,
            ErrorKind::Runtime => 3,
        }
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Input(_) | Error::Shape { .. } => ErrorKind::Config,
            Error::Validation(_)
            | Error::Parse { .. }
            | Error::Schema { .. }
            | Error::Label(_)
            | Error::MissingLabel { .. }
            | Error::DegenerateFit(_) => ErrorKind::Data,
            Error::Divergence { .. }
            | Error::Endpoint(_)
            | Error::Aborted(_)
            | Error::Io { .. }
            | Error::Serialize(_) => ErrorKind::Runtime,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind().exit_code()
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialize(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialize(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
