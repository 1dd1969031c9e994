use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing dataset file {0}")]
    MissingFile(PathBuf),

    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },

    #[error("node index {index} out of range for {num_nodes} nodes")]
    NodeOutOfRange { index: usize, num_nodes: usize },

    #[error("duplicate node index {0}")]
    DuplicateNode(usize),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("empty segment {0} in readout boundaries")]
    EmptySegment(usize),

    #[error("non-finite {what} at {location}")]
    NonFinite { what: String, location: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("split leakage: {0}")]
    Leakage(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    /// Stable machine-readable code, used by the CLI error JSON.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MissingFile(_) => "missing_file",
            Error::Parse { .. } => "parse",
            Error::NodeOutOfRange { .. } => "node_out_of_range",
            Error::DuplicateNode(_) => "duplicate_node",
            Error::Shape { .. } => "shape",
            Error::Invalid(_) => "invalid_argument",
            Error::Config { .. } => "config",
            Error::EmptySegment(_) => "empty_segment",
            Error::NonFinite { .. } => "non_finite",
            Error::Checkpoint(_) => "checkpoint",
            Error::Sampling(_) => "sampling",
            Error::Leakage(_) => "leakage",
            Error::Dimension(_) => "dimension",
        }
    }
}
