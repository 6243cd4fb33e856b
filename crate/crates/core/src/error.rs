use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Not well-formed XML.
    #[error("{path}:{line}:{column}: malformed XML: {message}")]
    Xml {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    /// Well-formed XML that does not follow the expected document layout.
    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("referential integrity violation: {0}")]
    Integrity(String),

    #[error("workload syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("cannot bind query {query}, predicate {predicate}: {message}")]
    Bind {
        query: String,
        predicate: String,
        message: String,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("type error: {0}")]
    Type(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the CLI; each error family gets its own code.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Xml { .. } | Error::Format { .. } | Error::Syntax { .. } => 2,
            Error::Bind { .. } | Error::Type(_) => 3,
            Error::Parameter(_) => 4,
            Error::Io { .. } | Error::Csv(_) => 5,
            Error::Integrity(_) | Error::Consistency(_) => 6,
        }
    }
}
