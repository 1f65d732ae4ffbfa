use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::backends::BackendError;
use crate::annotate::parse::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed manifest line: {message}")]
    ManifestLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate clip_id {clip_id:?} on lines {first} and {second}")]
    DuplicateClipId {
        clip_id: String,
        first: usize,
        second: usize,
    },

    #[error("line {line}: unknown action_id {action_id}")]
    UnknownAction { line: usize, action_id: u32 },

    #[error("invalid record: {0}")]
    Invalid(String),

    #[error("feature file error: {0}")]
    Feature(String),

    #[error("no person detected")]
    NoPersonDetected,

    #[error("sequence generation failed: {0}")]
    Sequence(String),

    #[error("stitching failed: {0}")]
    Stitch(String),

    #[error("media error: {0}")]
    Media(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("LLM reply could not be used after {attempts} attempt(s): {reason}; raw reply: {raw:?}")]
    LlmReply {
        attempts: usize,
        reason: String,
        raw: String,
    },

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("config error: {0}")]
    Config(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }
}
