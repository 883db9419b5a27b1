use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report. The variant name doubles as the
/// error's public name in CLI output and in Python exceptions.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("IndexBeyondHorizon: index {index} is past the last defined index {cap}")]
    IndexBeyondHorizon { index: u64, cap: u64 },

    #[error("SpecInvalid: at i={index}: {reason}")]
    SpecInvalid { index: u64, reason: String },

    #[error("LimitExceeded: value with ~{digits} decimal digits exceeds the budget of {budget}")]
    LimitExceeded { digits: u64, budget: u64 },

    #[error("TermUndefined: the very-old pool is empty at i={index}")]
    TermUndefined { index: u64 },

    #[error("RestrictionViolated: at i={index}: {detail}")]
    RestrictionViolated { index: u64, detail: String },

    #[error("ScheduleExhausted: night {night} is past the last playable night {cap}")]
    ScheduleExhausted { night: u64, cap: u64 },

    #[error("ValidityViolated: at i={index}: {detail}")]
    ValidityViolated { index: u64, detail: String },

    #[error("VerificationFailed: at i={index}: {check}")]
    VerificationFailed { index: u64, check: String },

    #[error("StrategyMismatch: {0}")]
    StrategyMismatch(String),

    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),

    #[error("ParseError: {0}")]
    Parse(String),
}

impl Error {
    pub fn name(&self) -> &'static str {
        match self {
            Error::IndexBeyondHorizon { .. } => "IndexBeyondHorizon",
            Error::SpecInvalid { .. } => "SpecInvalid",
            Error::LimitExceeded { .. } => "LimitExceeded",
            Error::TermUndefined { .. } => "TermUndefined",
            Error::RestrictionViolated { .. } => "RestrictionViolated",
            Error::ScheduleExhausted { .. } => "ScheduleExhausted",
            Error::ValidityViolated { .. } => "ValidityViolated",
            Error::VerificationFailed { .. } => "VerificationFailed",
            Error::StrategyMismatch(_) => "StrategyMismatch",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Parse(_) => "ParseError",
        }
    }

    /// Process exit code used by the CLI: 2 for resource limits and failed
    /// verifications, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::LimitExceeded { .. }
            | Error::VerificationFailed { .. }
            | Error::ValidityViolated { .. } => 2,
            _ => 1,
        }
    }
}
