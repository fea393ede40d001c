use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or settings; exit code 2.
    Usage(String),
    /// A module reported an error while running; exit code 1.
    Module { kind: &'static str, message: String },
}

impl CliError {
    pub fn module(kind: &'static str, err: impl fmt::Display) -> Self {
        CliError::Module { kind, message: err.to_string() }
    }

    pub fn usage(err: impl fmt::Display) -> Self {
        CliError::Usage(err.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Module { .. } => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Module { kind, message } => write!(f, "{kind}: {message}"),
        }
    }
}
