//! File formats and the command-line surface.

pub mod cli;
pub mod config;
pub mod log;
pub mod report;

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::model::PolicyId;

/// A validation problem, located in the source file when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct LocatedIssue {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for LocatedIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("PARSE_ERROR at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("VALIDATION_ERROR:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<LocatedIssue>),
    #[error("DUPLICATE_ROW: week {week} policy {policy} arm {arm} appears more than once")]
    DuplicateRow {
        week: u32,
        policy: PolicyId,
        arm: usize,
    },
    #[error("IO_ERROR: {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, IoError::Io { .. })
    }
}
