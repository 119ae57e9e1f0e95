use thiserror::Error;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mode count must be at least 1")]
    NoModes,
    #[error("mode index {index} out of range for {modes} modes")]
    ModeOutOfRange { index: usize, modes: usize },
    #[error("a two-mode operation needs two distinct modes, got {0} twice")]
    SameMode(usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("transmissivity {0} outside [0, 1]")]
    Transmissivity(f64),
    #[error("covariance matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("state violates the uncertainty principle (smallest symplectic eigenvalue {0:.12})")]
    Unphysical(f64),
    #[error("matrix is not symplectic (deviation {0:.3e})")]
    NotSymplectic(f64),
    #[error("state is mixed (largest symplectic eigenvalue {0:.12}); use the general Gaussian route")]
    MixedState(f64),
    #[error("covariance is ill-conditioned (condition number {0:.3e}); use the pure-state route")]
    IllConditioned(f64),
    #[error("Fisher information has vanishing trace ({0:.3e}); privacy is undefined")]
    Insensitive(f64),
    #[error("direction must have unit norm, got {0}")]
    NotUnitNorm(f64),
    #[error("tree depth must be at least {min}, got {got}")]
    Depth { min: u32, got: u32 },
    #[error("squeezing must be positive, got {0}")]
    Squeezing(f64),
    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(usize, usize),
    #[error("shot count must be positive")]
    NoShots,
    #[error("Fock truncation: {0}")]
    Fock(String),
    #[error("{0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
