use thiserror::Error;

use crate::action::ValidationError;
use crate::provider::ProviderError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced by the library.
///
/// `kind()` buckets them into the three failure classes the CLI maps to exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Validation(#[from] ValidationError),

    #[error("malformed element tree: {0}")]
    Tree(String),

    #[error("dangling parent: node {node} references missing parent {parent}")]
    DanglingParent { node: String, parent: String },

    #[error("coordinate ({x}, {y}) lies outside the {width}x{height} frame")]
    OutOfFrame {
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },

    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),

    #[error("expression evaluated to a non-finite value")]
    NonFinite,

    #[error("unknown element type `{name}`; known types: {known}")]
    UnknownElementType { name: String, known: String },

    #[error("missing prediction for sample `{0}`")]
    MissingPrediction(String),

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("conflicting system prompts for image `{0}`")]
    ConflictingSystemPrompt(String),

    #[error("cannot cross-pair refusals: pool spans fewer than two source categories")]
    CannotCrossPair,

    #[error("query text `{0}` not found")]
    QueryAbsent(String),

    #[error("character pair ({0}, {1}) not found inside query span")]
    PairAbsent(char, char),

    #[error("cell reference `{0}` is out of range")]
    CellOutOfRange(String),

    #[error("malformed cell reference `{0}`")]
    MalformedCell(String),

    #[error("shape has no thumbnail")]
    MissingThumbnail,

    #[error("could not parse provider response for stage `{stage}`: {raw}")]
    Parse { stage: String, raw: String },

    #[error(transparent)]
    Provider(#[from] ProviderError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error("{path}: {error}")]
    Io { path: String, error: std::io::Error },
}

/// Coarse failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Provider,
    Io,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Validation => "validation",
            ErrorKind::Provider => "provider",
            ErrorKind::Io => "io",
        }
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Provider(_) => ErrorKind::Provider,
            Error::Io { .. } | Error::Image(image::ImageError::IoError(_)) => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            error: source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
