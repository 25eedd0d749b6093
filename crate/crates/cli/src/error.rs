use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    /// Classifies a library error, naming the file it came from when known.
    pub fn from_core(e: simmap::Error, path: Option<&Path>) -> Self {
        use simmap::Error as E;
        let e = match path {
            Some(p) => e.in_file(p),
            None => e,
        };
        let msg = e.to_string();
        match e {
            E::Contract(_)
            | E::EmptyGraph { .. }
            | E::Disconnected { .. }
            | E::Resource(_) => CliError::Validation(msg),
            E::NoConvergence { .. } | E::Degenerate(_) => CliError::Numeric(msg),
            E::Parse { .. } | E::EmptyInput | E::Io { .. } | E::Format { .. } => {
                let msg = match path {
                    Some(p) if matches!(e, E::EmptyInput) => format!("{}: {msg}", p.display()),
                    _ => msg,
                };
                CliError::Io(msg)
            }
        }
    }
}

impl From<simmap::Error> for CliError {
    fn from(e: simmap::Error) -> Self {
        CliError::from_core(e, None)
    }
}
