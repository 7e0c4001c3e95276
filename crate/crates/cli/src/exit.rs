// SPDX-License-Identifier: Apache-2.0

use std::process::ExitCode;

use rtlopt_core::Error;

pub const OK: u8 = 0;
pub const NEGATIVE: u8 = 1;
pub const USAGE: u8 = 2;
pub const INPUT: u8 = 3;
pub const ENVIRONMENT: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or configuration, including adapters that cannot be built.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => USAGE,
            CliError::Core(e) => match e {
                Error::Domain(_) | Error::Template(_) => USAGE,
                Error::Environment(_) | Error::Io(_) => ENVIRONMENT,
                Error::Parse(_)
                | Error::MissingMetric(_)
                | Error::Unsupported(_)
                | Error::NoOutputs(_)
                | Error::AmbiguousTop(_)
                | Error::Rejected(_)
                | Error::EmptyLibrary
                | Error::DegeneratePair(_)
                | Error::Input(_) => INPUT,
            },
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}

pub type CliResult<T = u8> = Result<T, CliError>;

/// Wraps an I/O failure on a workspace file with its path.
pub fn io_at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Core(Error::Environment(format!("{}: {e}", path.display())))
}
