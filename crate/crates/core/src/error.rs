// SPDX-License-Identifier: Apache-2.0

use std::io;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An arithmetic precondition does not hold (e.g. a non-positive baseline).
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error: {0}")]
    Parse(String),
    /// A synthesis or timing report lacks one of the three metrics.
    #[error("report parse error: missing {0}")]
    MissingMetric(&'static str),
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("module '{0}' has no outputs to compare")]
    NoOutputs(String),
    #[error("ambiguous top module, candidates: {}", .0.join(", "))]
    AmbiguousTop(Vec<String>),
    #[error("template error: {0}")]
    Template(String),
    #[error("rule rejected: {0}")]
    Rejected(String),
    #[error("rule library is empty")]
    EmptyLibrary,
    #[error("degenerate pair: {0}")]
    DegeneratePair(String),
    /// Bad user input: unreadable design, failed sanity check, etc.
    #[error("input error: {0}")]
    Input(String),
    /// A tool, endpoint or file the run depends on is unavailable.
    #[error("environment error: {0}")]
    Environment(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
