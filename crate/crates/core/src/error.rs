use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("variable `{0}` is not numeric")]
    NotNumeric(String),

    #[error("invalid filter: {0}")]
    Filter(String),

    #[error("panel error: {0}")]
    Panel(String),

    #[error("insufficient observations: {0}")]
    InsufficientObservations(String),

    /// Rank deficiency detected while factorizing a design matrix.
    #[error("collinear regressor `{name}` (column {column})")]
    Collinear { column: usize, name: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("bootstrap failure: {failed} of {reps} replicates failed")]
    Bootstrap { failed: usize, reps: usize },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    /// Replace the positional column label of a collinearity error with the
    /// variable name at that position.
    pub fn with_names(self, names: &[String]) -> Self {
        match self {
            Error::Collinear { column, .. } if column < names.len() => Error::Collinear {
                column,
                name: names[column].clone(),
            },
            other => other,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Schema(_)
            | Error::UnknownVariable(_)
            | Error::NotNumeric(_)
            | Error::Filter(_)
            | Error::Panel(_)
            | Error::InsufficientObservations(_) => 2,
            Error::Collinear { .. }
            | Error::Domain(_)
            | Error::Contract(_)
            | Error::Degenerate(_)
            | Error::Bootstrap { .. }
            | Error::Alignment(_) => 3,
        }
    }
}
