use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("(m, n) = ({m}, {n}) is not admissible: need n > 1, and n >= 2m when n is even")]
    NotAdmissible { m: u32, n: u32 },

    #[error("ratio p0(lambda_{{i+1}})/p0(lambda_i) is undefined at i = {i} in the critical case")]
    DegenerateRatio { i: u32 },

    #[error("quantity is undefined in the critical case n = 2m")]
    CriticalCase,

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("aliasing tail {tail:.3e} exceeds threshold {threshold:.3e}; increase resolution")]
    TailOverflow { tail: f64, threshold: f64 },

    #[error("conformal factor 1 + v is not positive (min {min:.3e})")]
    NonPositiveConformalFactor { min: f64 },

    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:.3e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("field is not antipodally even (odd part {odd_norm:.3e})")]
    SymmetryViolation { odd_norm: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
