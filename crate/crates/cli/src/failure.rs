//! Exit codes: 2 for configuration, 3 for data, 4 for solver failures.

use fairpath_core::{Error, ErrorCategory};

pub const CONFIG: u8 = 2;
pub const DATA: u8 = 3;
pub const SOLVER: u8 = 4;

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

    pub fn config(msg: impl Into<String>) -> Self {
        Self::new(CONFIG, anyhow::anyhow!(msg.into()))
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self::new(DATA, anyhow::anyhow!(msg.into()))
    }
}

fn code_of(e: &Error) -> u8 {
    match e.category() {
        ErrorCategory::Config => CONFIG,
        ErrorCategory::Data => DATA,
        ErrorCategory::Solver => SOLVER,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::new(code_of(&e), e)
    }
}

pub type Outcome<T = ()> = std::result::Result<T, Failure>;

/// Attach an exit code and a context line to any error.
pub trait Tag<T> {
    fn tag(self, code: u8, context: impl FnOnce() -> String) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Tag<T> for std::result::Result<T, E> {
    fn tag(self, code: u8, context: impl FnOnce() -> String) -> Outcome<T> {
        self.map_err(|e| Failure::new(code, e.into().context(context())))
    }
}

/// Tag a core error by its category, keeping a context line.
pub fn core<T>(r: fairpath_core::Result<T>, context: impl FnOnce() -> String) -> Outcome<T> {
    r.map_err(|e| Failure::new(code_of(&e), anyhow::Error::new(e).context(context())))
}
