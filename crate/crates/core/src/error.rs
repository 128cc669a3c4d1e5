use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, BrnnError>;

#[derive(Debug, Error)]
pub enum BrnnError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: String,
        got: String,
    },

    /// The forward recursion produced a non-finite value.
    #[error("state overflow at step k={k}")]
    Overflow { k: usize },

    /// The co-state recursion produced a non-finite value (exploding gradient).
    #[error("co-state explosion at step k={k}")]
    Explosion { k: usize },

    #[error("parameter update diverged: {0} is no longer finite")]
    Divergence(&'static str),

    #[error("unbounded region: {0}")]
    UnboundedRegion(String),

    #[error("epoch {epoch}: {source}")]
    Training {
        epoch: usize,
        #[source]
        source: Box<BrnnError>,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl BrnnError {
    pub(crate) fn dim(what: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        BrnnError::Dimension {
            what,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        BrnnError::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// True for failures of the numerics (overflow, explosion, divergence),
    /// looking through any epoch wrapper.
    pub fn is_numerical(&self) -> bool {
        match self {
            BrnnError::Overflow { .. } | BrnnError::Explosion { .. } | BrnnError::Divergence(_) => {
                true
            }
            BrnnError::Training { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// True for I/O and file-format failures.
    pub fn is_io(&self) -> bool {
        match self {
            BrnnError::Io(_) | BrnnError::Parse { .. } => true,
            BrnnError::Training { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
