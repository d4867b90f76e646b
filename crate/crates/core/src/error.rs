use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("discretization failure: {0}")]
    Discretization(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A Rayleigh quotient that should be positive was not. Carries the
    /// offending field so the caller can inspect it.
    #[error("coercivity violation in quotient {quotient}: value {value:.3e}")]
    CoercivityViolation {
        quotient: usize,
        value: f64,
        witness: Vec<f64>,
    },

    #[error("decomposition failed after {iterations} iterations (residual {residual:.3e})")]
    DecompositionFailure { iterations: usize, residual: f64 },

    #[error("decomposition left the trust region: lambda = {lambda:.6} not in [{lo:.6}, {hi:.6}]")]
    TrustRegion { lambda: f64, lo: f64, hi: f64 },

    #[error("state too far from the soliton family: relative distance {0:.3}")]
    NotNearManifold(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("self-similar grid exceeds the radial domain; largest usable y is {max_y:.4}")]
    DomainExceeded { max_y: f64 },

    #[error("frame mismatch: {0}")]
    FrameMismatch(String),

    #[error("construction blew up before t = 0 (at t = {time:.6})")]
    Construction { time: f64 },

    #[error("bracket error: {0}")]
    Bracket(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
