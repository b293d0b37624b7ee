use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("exterior point")]
    ExteriorPoint,
    #[error("point is not on the boundary (signed distance {0:e})")]
    NotOnBoundary(f64),
    #[error("outside boundary collar")]
    OutsideCollar,
    #[error("diagonal singularity")]
    DiagonalSingularity,
    #[error("point outside domain")]
    OutsideDomain,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("Fredholm system singular")]
    SingularSystem,
    #[error("near-boundary evaluation not supported at this resolution")]
    NearBoundary,
    #[error("charge compatibility violated: boundary density integrates to {total}, expected {expected}")]
    ChargeCompatibility { total: f64, expected: f64 },
    #[error("continuation criterion violated: {0}")]
    Continuation(String),
    #[error("charge reached boundary (charge {0})")]
    ChargeReachedBoundary(usize),
    #[error("plasma-charge collision (particle {particle}, charge {charge})")]
    PlasmaChargeCollision { particle: usize, charge: usize },
    #[error("grazing trap (particle {0})")]
    GrazingTrap(usize),
    #[error("field singularity")]
    FieldSingularity,
    #[error("invalid config [{condition}]: {message}")]
    Config {
        condition: &'static str,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Short machine-readable reason used in run summaries.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::ChargeReachedBoundary(_) => "boundary collision",
            Error::PlasmaChargeCollision { .. } => "plasma-charge collision",
            Error::GrazingTrap(_) => "grazing trap",
            Error::Continuation(_) => "continuation criterion violated",
            Error::FieldSingularity => "field singularity",
            Error::Config { .. } => "invalid config",
            _ => "error",
        }
    }
}
