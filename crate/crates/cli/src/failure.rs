use std::fmt;

use critdet_core::Error;

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    BadArguments = 2,
    Numerical = 3,
    CheckFailed = 4,
}

#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

pub fn bad_args(msg: impl Into<String>) -> Failure {
    Failure { exit: Exit::BadArguments, message: msg.into() }
}

pub fn check_failed(msg: impl Into<String>) -> Failure {
    Failure { exit: Exit::CheckFailed, message: msg.into() }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let exit = match e {
            Error::InvalidCoefficients(_)
            | Error::NoBoundedOrbit(_)
            | Error::OutOfRange(_)
            | Error::WrongLevel(_)
            | Error::NoDisc(_)
            | Error::NoRealU0(_)
            | Error::BracketInvalid(_)
            | Error::NotStationary(_)
            | Error::EpsilonTooLarge { .. } => Exit::BadArguments,
            Error::Overflow(_)
            | Error::StepFailure { .. }
            | Error::Quadrature(_)
            | Error::PlateauNotFound(_)
            | Error::Integration(_) => Exit::Numerical,
        };
        Failure { exit, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { exit: Exit::Numerical, message: format!("io: {e}") }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure { exit: Exit::BadArguments, message: format!("json: {e}") }
    }
}
