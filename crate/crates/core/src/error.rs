use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the optimization toolkit.
///
/// Every variant is cheap to clone so that a failed run can carry its
/// error inside the returned [`Trace`](crate::trace::Trace).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid rank: k = {k} but dimension is {p}")]
    InvalidRank { k: usize, p: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate spectrum: eigenvalue {lambda:e} is at or below tolerance {tol:e}")]
    DegenerateSpectrum { lambda: f64, tol: f64 },

    #[error("overflow evaluating sample {index}: linear predictor {value:e} exceeds the exp range")]
    Overflow { index: usize, value: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("divergence: objective rose from {f0:e} to {f:e}")]
    Divergence { f0: f64, f: f64 },

    #[error("invalid sample size {requested} for n = {n}")]
    InvalidSize { requested: usize, n: usize },

    #[error("coefficient requires a bounded parameter set")]
    RequiresBoundedSet,

    #[error("out of regime: {0}")]
    OutOfRegime(String),

    #[error("sample too small: k - c2*K*sqrt(log p/|S|) = {margin:e} <= 0")]
    SampleTooSmall { margin: f64 },

    #[error("no convergence guarantee: xi1 + delta = {value} >= 1")]
    NoGuarantee { value: f64 },

    #[error("no iteration bound: {0}")]
    NoBound(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no convergence phase detected")]
    PhasesUndetected,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidRank { .. } => "invalid-rank",
            Error::InvalidInput(_) => "invalid-input",
            Error::DegenerateSpectrum { .. } => "degenerate-spectrum",
            Error::Overflow { .. } => "overflow",
            Error::NumericalFailure(_) => "numerical-failure",
            Error::Divergence { .. } => "divergence",
            Error::InvalidSize { .. } => "invalid-size",
            Error::RequiresBoundedSet => "requires-bounded-set",
            Error::OutOfRegime(_) => "out-of-regime",
            Error::SampleTooSmall { .. } => "sample-too-small",
            Error::NoGuarantee { .. } => "no-guarantee",
            Error::NoBound(_) => "no-bound",
            Error::InsufficientData(_) => "insufficient-data",
            Error::PhasesUndetected => "phases-undetected",
            Error::Parse { .. } => "parse",
            Error::Shape(_) => "shape",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
