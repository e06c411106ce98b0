use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record: field `{field}`: {reason}")]
    Field { field: String, reason: String },

    #[error("{what} line {line}: {reason}")]
    Format {
        what: &'static str,
        line: usize,
        reason: String,
    },

    #[error("duplicate table id `{0}`")]
    DuplicateTable(String),

    #[error("unknown table `{0}`")]
    UnknownTable(String),

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("unknown index field `{0}`")]
    UnknownField(String),

    #[error("cyclic redirects: {}", .0.join(" -> "))]
    RedirectCycle(Vec<String>),

    #[error("empty table: {0}")]
    EmptyTable(String),

    #[error("invalid split fraction {0}; expected one of 0.25, 0.5, 0.75, 1.0")]
    SplitFraction(f64),

    #[error("element `{element}` has no representation in the {space} space")]
    Inadmissible {
        element: &'static str,
        space: &'static str,
    },

    #[error("semantic space mismatch: {0} vs {1}")]
    SpaceMismatch(&'static str, &'static str),

    #[error("feature layout mismatch: {0}")]
    Layout(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("corrupt index file: {0}")]
    CorruptIndex(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Field {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
