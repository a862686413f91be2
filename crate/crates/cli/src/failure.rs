use std::fmt;

use genecluster::Error;

/// Why a command stopped, carrying the process exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    /// Errors from reading or processing inputs. Config errors are usage
    /// errors.
    pub fn data(e: Error) -> Self {
        match e {
            Error::Config(msg) => Failure::Usage(format!("config: {msg}")),
            other => Failure::Data(other.to_string()),
        }
    }

    pub fn runtime(e: impl fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}
