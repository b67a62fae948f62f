//! Exit-code mapping.

use std::fmt;
use std::process::ExitCode;

use filterlab_core::Error;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    BlowUp(String),
    Collapse(String),
    CheckFailure(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::BlowUp(_) => 3,
            CliError::Collapse(_) => 4,
            CliError::CheckFailure(_) => 5,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::BlowUp(m) => write!(f, "blow-up: {m}"),
            CliError::Collapse(m) => write!(f, "filter collapse: {m}"),
            CliError::CheckFailure(m) => write!(f, "check failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidParameter { .. }
            | Error::Unknown { .. }
            | Error::DimensionMismatch { .. }
            | Error::IndexOutOfRange { .. } => CliError::Config(msg),
            Error::BlowUp { .. } | Error::NonFinite { .. } | Error::NotPsd { .. } => {
                CliError::BlowUp(msg)
            }
            Error::FilterCollapse { .. } | Error::Degenerate(_) => CliError::Collapse(msg),
            Error::Io(_) => CliError::Io(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
