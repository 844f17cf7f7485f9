use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("frame error: {0}")]
    Frame(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("eigensolver did not converge after {iterations} iterations (worst residual {worst:.3e})")]
    Convergence {
        iterations: usize,
        worst: f64,
        residuals: Vec<f64>,
    },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::Unsupported(_)
            | Error::Domain(_)
            | Error::Frame(_)
            | Error::Shape(_)
            | Error::Config(_) => 2,
            Error::Convergence { .. } => 3,
            Error::Contract(_) => 4,
            Error::Assembly(_) | Error::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Unsupported(_) => "unsupported",
            Error::Domain(_) => "domain",
            Error::Frame(_) => "frame",
            Error::Shape(_) => "shape",
            Error::Assembly(_) => "assembly",
            Error::Convergence { .. } => "convergence",
            Error::Contract(_) => "contract",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    /// Prefix the message with context, keeping the variant.
    pub fn context(self, what: &str) -> Error {
        match self {
            Error::Validation(m) => Error::Validation(format!("{what}: {m}")),
            Error::Unsupported(m) => Error::Unsupported(format!("{what}: {m}")),
            Error::Domain(m) => Error::Domain(format!("{what}: {m}")),
            Error::Frame(m) => Error::Frame(format!("{what}: {m}")),
            Error::Shape(m) => Error::Shape(format!("{what}: {m}")),
            Error::Assembly(m) => Error::Assembly(format!("{what}: {m}")),
            Error::Contract(m) => Error::Contract(format!("{what}: {m}")),
            Error::Config(m) => Error::Config(format!("{what}: {m}")),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
