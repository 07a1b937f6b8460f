use thiserror::Error;

/// Errors reported by the library.
///
/// The variants map onto three classes ([`ErrorClass`]) that the command line
/// front end turns into exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing required key: {0}")]
    MissingKey(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("singular Bloch system at z = {z}: {detail}")]
    Singular { z: f64, detail: String },
    #[error("normal-mode basis undefined: total control strength is zero")]
    UndefinedBasis,
    #[error("steady-state integration not converged: step halving changed {quantity} by {delta:e} (tolerance {tolerance:e})")]
    NotConverged {
        quantity: &'static str,
        delta: f64,
        tolerance: f64,
    },
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("perturbative regime violated: max |rho| = {max_coherence:.3} at z = {z:.4}")]
    Perturbative { max_coherence: f64, z: f64 },
    #[error("ray at offset {offset_um} um failed: {source}")]
    Ray {
        offset_um: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse error classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Solver,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::MissingKey(_) | Error::Config(_) | Error::InvalidInput(_) | Error::Parse { .. } => {
                ErrorClass::Config
            }
            Error::Json(e) if e.is_io() => ErrorClass::Io,
            Error::Json(_) => ErrorClass::Config,
            Error::Io(_) => ErrorClass::Io,
            Error::Ray { source, .. } => source.class(),
            Error::Singular { .. }
            | Error::UndefinedBasis
            | Error::NotConverged { .. }
            | Error::Resolution(_)
            | Error::Perturbative { .. } => ErrorClass::Solver,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
