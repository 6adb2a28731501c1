use std::fmt;

use crate::region::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch at node `{node}`: {detail}")]
    ShapeMismatch { node: String, detail: String },

    #[error("input `{0}` is not bound")]
    UnboundInput(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("no activation recorded for node `{0}`")]
    MissingActivation(String),

    #[error("node `{0}` does not produce a scalar")]
    NotScalar(String),

    #[error("label {label} out of range for variable {variable} (cardinality {cardinality})")]
    LabelOutOfRange {
        variable: usize,
        label: usize,
        cardinality: usize,
    },

    #[error("state space of {size} configurations exceeds the enumeration limit {limit}")]
    StateSpaceTooLarge { size: u128, limit: u128 },

    #[error("invalid region graph: {}", join_violations(.0))]
    InvalidGraph(Vec<Violation>),

    #[error("non-finite gradient in parameter `{parameter}` at index {index}")]
    NonFiniteGradient { parameter: String, index: usize },

    #[error("non-finite objective at iteration {0}")]
    NonFiniteObjective(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("incompatible: {0}")]
    Incompatible(String),

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated file")]
    Truncated,

    #[error("checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// A configuration problem, located at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ConfigError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ConfigError {}
