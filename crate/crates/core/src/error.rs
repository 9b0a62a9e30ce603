use thiserror::Error;

/// Errors raised by reward, loss, diagnostic and dynamics routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A value that must be finite was NaN or infinite.
    #[error("non-finite value for {0}")]
    NonFinite(&'static str),

    /// An exponential left the representable range of f64.
    #[error("{0} saturated (overflow outside the f64 range)")]
    Saturation(&'static str),

    /// A with-reference loss was requested without reference log-probabilities.
    #[error("reference log-probabilities are required for {0}")]
    MissingReference(&'static str),

    /// The alpha threshold is undefined when the length-normalized margin is zero.
    #[error("alpha threshold undefined: length-normalized margin is zero")]
    UndefinedThreshold,

    /// The alpha threshold needs a strictly positive gradient inner product.
    #[error("alpha threshold premise violated: <grad pi_w, grad pi_l> = {0} is not positive")]
    PremiseViolation(f64),

    /// An asymptotic probe met neither the vanishing nor the divergence threshold.
    #[error("inconclusive asymptote at alpha = {alpha}: |dl/dv| = {magnitude:e}")]
    Inconclusive { alpha: f64, magnitude: f64 },

    /// A configuration value failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A dataset record could not be parsed.
    #[error("dataset line {line}: field `{field}`: {message}")]
    Dataset {
        line: usize,
        field: String,
        message: String,
    },

    /// The gradient-flow integrator produced a non-finite state.
    #[error("integrator aborted at t = {time}: {detail}")]
    Integrator { time: f64, detail: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what))
    }
}
