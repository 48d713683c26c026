use std::path::PathBuf;

use crate::design::Design;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("feature undefined: {0}")]
    UndefinedFeature(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("validation failed for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange { what: &'static str, index: usize, len: usize },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("container too small: area {container_area:.4} mm² < smallest stone {stone_area:.4} mm²")]
    ContainerTooSmall { container_area: f64, stone_area: f64 },

    #[error("generation failed: {reason}")]
    GenerationFailed { reason: String, partial: Box<Design> },

    #[error("render degenerate: {0}")]
    RenderDegenerate(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), message: message.into() }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse { context: context.into(), message: message.to_string() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
