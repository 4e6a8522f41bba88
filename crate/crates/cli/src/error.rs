use std::fmt;

/// A failed command. The variant picks the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad config values or an empty input set.
    Usage(String),
    /// Missing, unreadable or malformed files.
    Data(String),
    /// Non-finite loss or a failed gradient check.
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn usage(msg: impl fmt::Display) -> Self {
        CliError::Usage(msg.to_string())
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        CliError::Data(msg.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<lambda_nli::Error> for CliError {
    fn from(e: lambda_nli::Error) -> Self {
        use lambda_nli::Error as E;
        match e {
            E::NonFinite { .. } => CliError::Numeric(e.to_string()),
            E::EmptyDataset(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
