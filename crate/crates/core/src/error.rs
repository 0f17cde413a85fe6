use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The small-index condition `α C ω 3^(α-1) / (8 (2-α) d) > K1 L0^α` failed.
    #[error("small-alpha gate failed: margin {margin:e} (need > 0)")]
    GateFailure { margin: f64 },

    #[error("quadrature did not converge at r = {r}: error estimate {err:e} after {subdivisions} subdivisions")]
    Quadrature {
        r: f64,
        err: f64,
        subdivisions: usize,
    },

    #[error("certificate failure: {quantity} = {value:e} at r = {r}")]
    Certificate {
        quantity: &'static str,
        value: f64,
        r: f64,
    },

    #[error("event budget of {budget} exceeded at t = {t}")]
    EventBudget { budget: u64, t: f64 },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("drift integration step underflow at t = {t} (step {step:e})")]
    StepUnderflow { t: f64, step: f64 },

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("sample size {n} exceeds the cap of {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("path {path_id}: {source}")]
    Path { path_id: usize, source: Box<Error> },
}

impl Error {
    /// The underlying error, with any path context removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Path { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
