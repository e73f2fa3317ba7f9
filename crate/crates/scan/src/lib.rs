//! SCAN-family navigation commands.
//!
//! * [`grammar`]: recursive-descent parser and the compositional
//!   interpreter that serves as ground truth for every dataset.
//! * [`generate`]: exhaustive SCAN enumeration and the seeded SCAN-ext
//!   sampler.
//! * [`split`]: the standard train/test splits, MCD index loading and dev
//!   extraction.
//! * [`miniscan`]: loader for small pseudo-word datasets.
//! * [`io`]: the `IN: ... OUT: ...` line format.

pub mod generate;
pub mod grammar;
pub mod io;
pub mod miniscan;
pub mod split;

use thiserror::Error;

pub use generate::{generate_scan, generate_scan_ext, ExtSizes};
pub use grammar::{interpret, parse, Action, ParseError};
pub use split::{load_mcd, split, DatasetSplit, SplitName};

/// One command → action-sequence pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Example {
    pub command: Vec<String>,
    pub actions: Vec<String>,
}

impl Example {
    pub fn new(command: &str, actions: &str) -> Self {
        Example {
            command: command.split_whitespace().map(str::to_string).collect(),
            actions: actions.split_whitespace().map(str::to_string).collect(),
        }
    }

    pub fn command_str(&self) -> String {
        self.command.join(" ")
    }

    pub fn actions_str(&self) -> String {
        self.actions.join(" ")
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unknown split `{0}`")]
    UnknownSplit(String),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("command `{0}` does not resolve to a generated example")]
    Unresolved(String),
    #[error("load error: {0}")]
    Load(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
