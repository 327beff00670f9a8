use thiserror::Error;

/// Errors surfaced by the analysis pipeline.
///
/// Variants are grouped by the exit code the CLI maps them to: configuration
/// problems, data problems, I/O, and numerical failures.
#[derive(Debug, Error)]
pub enum WatchError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("column `{column}`: {reason}")]
    InvalidColumn { column: String, reason: String },

    #[error("treatment not binary: column `{column}` has {n_levels} distinct values")]
    TreatmentNotBinary { column: String, n_levels: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<WatchError>,
    },

    #[error("i/o error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = WatchError> = std::result::Result<T, E>;

/// Broad class of an error, used for CLI exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Io,
    Numerical,
}

impl WatchError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        WatchError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            WatchError::Config(_) | WatchError::Json(_) => ErrorClass::Config,
            WatchError::MissingColumn(_)
            | WatchError::InvalidColumn { .. }
            | WatchError::TreatmentNotBinary { .. }
            | WatchError::Data(_)
            | WatchError::Csv(_) => ErrorClass::Data,
            WatchError::Io { .. } => ErrorClass::Io,
            WatchError::Numerical(_) => ErrorClass::Numerical,
            WatchError::Context { source, .. } => source.class(),
        }
    }
}

/// Attach module context to an error while keeping its class.
pub trait ResultExt<T> {
    fn context(self, context: impl Into<String>) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, context: impl Into<String>) -> Result<T> {
        self.map_err(|source| WatchError::Context {
            context: context.into(),
            source: Box::new(source),
        })
    }
}
