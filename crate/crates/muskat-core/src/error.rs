use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("invalid scenario parameter: {0}")]
    InvalidParam(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid quadrature spec: {0}")]
    InvalidQuadrature(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("quadrature did not converge for {integral} (estimate {estimate:e}, error {error:e})")]
    Quadrature {
        integral: String,
        estimate: f64,
        error: f64,
    },
    #[error("invalid modulus spec: {0}")]
    InvalidModulus(String),
    #[error("omega never reaches {target} (attained sup {attained})")]
    OmegaRange { target: f64, attained: f64 },
    #[error("invalid stepper config: {0}")]
    InvalidStepper(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
