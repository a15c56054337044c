use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("structure violation: {what} (residual {residual:.3e})")]
    StructureViolation { what: String, residual: f64 },

    /// The candidate vector lies (numerically) in the current symplectic span.
    #[error("degenerate candidate: residual {residual:.3e} at or below tolerance {tol:.3e}")]
    DegenerateCandidate { residual: f64, tol: f64 },

    #[error("decomposition failed: {what} (residual {residual:.3e})")]
    DecompositionFailure { what: String, residual: f64 },

    #[error("non-finite value in state vector")]
    NonFiniteState,

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time step failed after {iterations} iterations (residual {residual:.3e})")]
    StepFailure { iterations: usize, residual: f64 },

    #[error("unsupported model for this operation: {0}")]
    UnsupportedModel(String),

    #[error("insufficient rank: requested {requested}, available {available}")]
    InsufficientRank { requested: usize, available: usize },

    #[error(
        "coefficient Gram matrix is rank deficient (smallest eigenvalue {min_eig:.3e} < {tol:.3e}); \
         lower k or perturb Z"
    )]
    RankDegeneracy { min_eig: f64, tol: f64 },

    /// Basis is not compatible with a vertical (Cotangent-Lift type) dissipation field.
    #[error("structure warning: block {block} has max-norm {norm:.3e}, expected zero")]
    StructureWarning { block: &'static str, norm: f64 },

    #[error("integration failed at mu = {mu:?}, t = {t}: {source}")]
    Integration {
        mu: Vec<f64>,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::InvalidDimension(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::DecompositionFailure { .. }
            | Error::StepFailure { .. }
            | Error::RankDegeneracy { .. }
            | Error::NonFiniteState
            | Error::DegenerateCandidate { .. } => true,
            Error::Integration { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
