//! Process exit codes.

use std::fmt;

use pwvie::Error;

pub const VERIFY_FAILED: i32 = 1;
pub const INVALID_INPUT: i32 = 2;
pub const NO_CONSTANTS: i32 = 3;
pub const CONTRACTION: i32 = 4;
pub const MISSING_PARAMS: i32 = 5;
pub const HASH_MISMATCH: i32 = 6;

/// A failure carrying the status the process should exit with.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::Parse { .. }
            | Error::Unsupported { .. }
            | Error::PieceCountMismatch { .. }
            | Error::InvalidBoundary(_)
            | Error::NotCovered(_)
            | Error::SingularDiagonal { .. }
            | Error::ParameterMismatch(_) => INVALID_INPUT,
            Error::NoValidConstants { .. } | Error::ConditionNotCertified { .. } => NO_CONSTANTS,
            Error::ContractionFailure { .. } | Error::WeightExhausted { .. } | Error::StepOrdering { .. } => {
                CONTRACTION
            }
            Error::MissingParameter(_) => MISSING_PARAMS,
            _ => 1,
        };
        Failure::new(code, err.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Failure::new(INVALID_INPUT, err.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(err: serde_json::Error) -> Self {
        Failure::new(INVALID_INPUT, format!("invalid JSON: {err}"))
    }
}
