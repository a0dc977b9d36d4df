use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no supercritical regime: 2*gamma = {two_gamma} <= alpha*pi^2/L^2 = {threshold}")]
    NoSupercriticalRegime { two_gamma: f64, threshold: f64 },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("ambiguous critical set: {0}")]
    AmbiguousCriticalSet(String),

    #[error("invalid mode index {0:?}: the zero mode is excluded")]
    ZeroMode([u32; 3]),

    #[error("shape mismatch: expected {expected:?}, got {found:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },

    #[error("no sign change of the maximal growth rate on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("marginal discriminant {name} = {value:e}: undetermined by cubic truncation")]
    Marginal { name: &'static str, value: f64 },

    #[error("temperature {temperature} is not on the bifurcated side ({reason})")]
    WrongSide { temperature: f64, reason: String },

    #[error("step rejected at t = {t}: {reason}")]
    StepRejected { t: f64, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
