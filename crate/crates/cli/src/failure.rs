use acdgen_core::Error;

pub const USAGE: u8 = 1;
pub const DATA: u8 = 2;
pub const BACKEND: u8 = 3;

/// An error plus the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }

    /// Configuration problems exit with the usage code whatever the
    /// underlying error (a missing config file is still a usage error).
    pub fn usage(error: Error) -> Self {
        Self::new(USAGE, error)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new(DATA, anyhow::anyhow!(message.into()))
    }

    pub fn backend(message: impl Into<String>) -> Self {
        Self::new(BACKEND, anyhow::anyhow!(message.into()))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Template(_) => USAGE,
            Error::Backend(_) => BACKEND,
            _ => DATA,
        };
        Self::new(code, e)
    }
}
