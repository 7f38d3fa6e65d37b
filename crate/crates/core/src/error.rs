use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("ball of radius {radius} would exceed the element cap of {cap}")]
    BudgetExceeded { radius: u32, cap: usize },
    #[error("unsupported group `{0}`")]
    UnsupportedGroup(String),
    #[error("insufficient radius {got} (need at least {need})")]
    InsufficientRadius { got: u32, need: u32 },
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("value {value} outside the range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("summability check failed: {0}")]
    Divergent(String),
    #[error("word length unknown for element {0}")]
    MissingWordLength(String),
    #[error("operation requires a lattice group, got `{0}`")]
    WrongGroup(String),
    #[error("negative integrand: measure is not lazy (mass at identity {0} < 1/2)")]
    NotLazy(f64),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("log-probability bounds too wide ({0}) for fitting")]
    BoundsTooWide(f64),
    #[error("prediction regime does not match: {0}")]
    RegimeMismatch(String),
    #[error("zero Dirichlet energy for test function `{0}`")]
    ZeroDirichlet(String),
    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
