use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

/// Every failure the engine can report.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("structural error: {0}")]
    Structural(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("invalid automorphism: {0} is not a unit modulo 2N")]
    InvalidAutomorphism(u64),
    #[error("level exhausted in {op}: requires {required} level(s), {available} available")]
    LevelExhausted {
        op: &'static str,
        required: usize,
        available: usize,
    },
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("missing rotation key for index {0}")]
    MissingKey(i64),
    #[error("missing relinearization key")]
    MissingRelinKey,
    #[error("refresh unavailable: no recryption authority attached")]
    RefreshUnavailable,
    #[error("compare unavailable: no comparison authority attached")]
    CompareUnavailable,
    #[error("decryption unavailable: backend holds no secret key")]
    MissingSecretKey,
    #[error("planner contract violated: {0}")]
    PlannerContract(String),
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps the error with a location such as `layer 3, t=2`.
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error with all context layers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for input/config problems, false for homomorphic-evaluation contract failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self.root(),
            Error::Parameter(_)
                | Error::Domain(_)
                | Error::Format(_)
                | Error::Validation(_)
                | Error::Capacity(_)
        )
    }
}
