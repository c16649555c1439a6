//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("model and scene clouds differ in length ({model} vs {scene})")]
    LengthMismatch { model: usize, scene: usize },

    #[error("sigma list length {got} does not match cloud length {expected}")]
    SigmaLengthMismatch { got: usize, expected: usize },

    #[error("need at least 3 correspondences, got {0}")]
    TooFewPoints(usize),

    #[error("non-finite coordinate in {cloud} cloud at point {index}")]
    NonFinitePoint { cloud: &'static str, index: usize },

    #[error("sigma[{index}] = {value} is not a positive finite number")]
    NonPositiveSigma { index: usize, value: f64 },

    #[error("centered model points are collinear or coincident (rank < 2)")]
    DegenerateCloud,

    #[error("matrix contains non-finite entries")]
    NonFiniteMatrix,

    #[error("matrix is numerically singular (smallest/largest singular value = {0:.3e})")]
    SingularInput(f64),

    #[error("{0}")]
    InvalidRotation(String),

    #[error(
        "correspondence matrix has repeated or zero singular values (relative gap {gap:.3e}); \
         symmetric clouds form equilibrium continua and cannot be enumerated"
    )]
    DegenerateSpectrum { gap: f64 },

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("state became non-finite at step {step}; reduce dt or the spring stiffness")]
    NonFiniteState { step: usize },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    CloudParse {
        path: String,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
