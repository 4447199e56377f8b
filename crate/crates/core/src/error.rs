use thiserror::Error;

/// Errors raised across the analysis toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid event times: {0}")]
    InvalidTimes(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("configuration does not terminate: {0}")]
    Nonterminating(String),

    #[error("input exceeds supported size: {0}")]
    TooLarge(String),

    #[error("no parseable records in input")]
    EmptyInput,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
