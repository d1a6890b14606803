use std::fmt;

/// Failure classes, one per process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configs or inputs that do not fit together.
    Validation(String),
    /// Missing, unreadable or corrupt files.
    Io(String),
    /// A NaN or infinity surfaced during a run.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    /// Prefixes the message with where it happened.
    pub fn context(self, what: impl fmt::Display) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{what}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{what}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<jointrecon::Error> for CliError {
    fn from(e: jointrecon::Error) -> Self {
        use jointrecon::Error::*;
        let msg = e.to_string();
        match e {
            Io(_) | BadMagic { .. } | Version(_) | UnknownDtype(_) | Truncated(_) => CliError::Io(msg),
            NonFinite(_) | Numerical { .. } => CliError::Numerical(msg),
            Shape(_) | Domain(_) | MissingTensor(_) | TensorShape { .. } => CliError::Validation(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
