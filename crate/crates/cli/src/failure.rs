use std::fmt;

use smp_core::Error;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Code {
    Config = 2,
    Data = 3,
    Runtime = 4,
}

/// A command failure carrying the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: Code,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: Code, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Failure::new(Code::Config, anyhow::anyhow!("{msg}"))
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Failure::new(Code::Data, anyhow::anyhow!("{msg}"))
    }

    pub fn context(self, ctx: impl fmt::Display + Send + Sync + 'static) -> Self {
        Failure {
            code: self.code,
            error: self.error.context(ctx),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

/// Code for an error raised by the library outside of file loading.
pub fn classify(e: &Error) -> Code {
    match e {
        Error::InvalidConfig { .. } => Code::Config,
        Error::Shape(_)
        | Error::EmptyClass(_)
        | Error::MissingTrueLabels
        | Error::MissingVerifiedMask
        | Error::LabelOutOfRange { .. }
        | Error::Format(_)
        | Error::Incompatible(_) => Code::Data,
        Error::Phase { .. } | Error::NonFinite(_) | Error::ZeroNorm { .. } | Error::Io(_) | Error::Json(_) => {
            Code::Runtime
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(classify(&e), e)
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Maps any error to `code`.
pub trait OrCode<T> {
    fn or_code(self, code: Code) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> OrCode<T> for Result<T, E> {
    fn or_code(self, code: Code) -> CliResult<T> {
        self.map_err(|e| Failure::new(code, e))
    }
}
