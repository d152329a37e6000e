use thiserror::Error;

/// Errors raised by the physics library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid spacing {spacing:.4e} does not resolve potential period (need ≤ {limit:.4e})")]
    UnresolvedPotential { spacing: f64, limit: f64 },
    #[error("packet width {width:.4e} is below 4 grid spacings ({min:.4e})")]
    PacketTooNarrow { width: f64, min: f64 },
    #[error("packet tail amplitude {tail:.3e} at domain edge exceeds 1e-10")]
    PacketOverlapsBoundary { tail: f64 },
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("channel population {0:.3e} too small to define a polarization")]
    EmptyChannel(f64),
    #[error("matrix is not a valid density matrix: {0}")]
    InvalidDensity(String),
    #[error("expected a pure state: {0}")]
    NotPure(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("propagation diverged at t = {time:.6e}: {reason}")]
    Diverged { time: f64, reason: String },
    #[error("Rabi fit failed: {0}")]
    FitFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
