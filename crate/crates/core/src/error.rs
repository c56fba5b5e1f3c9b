use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("kernel singularity: {0}")]
    Singularity(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("outside domain: {0}")]
    Domain(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("diverging: {0}")]
    Diverging(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("no convergence after {iterations} iterations: {detail}")]
    NonConvergence { iterations: usize, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($arg:tt)+) => {{
        // bound first so that NaN fails every check
        let ok: bool = $cond;
        if !ok {
            return Err($crate::Error::$variant(format!($($arg)+)));
        }
    }};
}
pub(crate) use ensure;
