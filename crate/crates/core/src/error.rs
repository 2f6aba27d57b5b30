use thiserror::Error;

/// Errors raised by the library. Negative outcomes that are part of normal
/// operation (no certificate, line target missed) are values, not errors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty set")]
    EmptySet,
    #[error("epsilon out of range: {0}")]
    EpsilonOutOfRange(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate ladder: {0}")]
    DegenerateLadder(String),
    #[error("insufficient crossings: {0}")]
    InsufficientCrossings(String),
    #[error("kappa/rho regime violated: {0}")]
    RegimeViolated(String),
    #[error("density insufficient: {0}")]
    DensityInsufficient(String),
    #[error("below density threshold: {0}")]
    BelowDensityThreshold(String),
    #[error("order out of range: {0}")]
    OrderOutOfRange(String),
    #[error("too large: {0}")]
    TooLarge(String),
    #[error("bump certification failed: {0}")]
    BumpCertification(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Short machine-readable tag for structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptySet => "empty_set",
            Error::EpsilonOutOfRange(_) => "epsilon_out_of_range",
            Error::InvalidInput(_) => "invalid_input",
            Error::DegenerateLadder(_) => "degenerate_ladder",
            Error::InsufficientCrossings(_) => "insufficient_crossings",
            Error::RegimeViolated(_) => "regime_violated",
            Error::DensityInsufficient(_) => "density_insufficient",
            Error::BelowDensityThreshold(_) => "below_density_threshold",
            Error::OrderOutOfRange(_) => "order_out_of_range",
            Error::TooLarge(_) => "too_large",
            Error::BumpCertification(_) => "bump_certification",
            Error::Precondition(_) => "precondition",
            Error::Solver(_) => "solver",
            Error::Internal(_) => "internal",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
