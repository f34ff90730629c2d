use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Population pushed against the Fock cutoff beyond the allowed tolerance.
    #[error("state leaks past the Fock cutoff {cutoff}: {leaked:.3e} > tolerance {tol:.1e}")]
    Leak { cutoff: usize, leaked: f64, tol: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator is not hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("measurement outcome has vanishing probability ({0:.3e})")]
    ZeroProbability(f64),

    #[error("well-separated regime required: {0}")]
    Regime(String),

    #[error("quadrature grid does not cover the density: endpoint value {0:.3e}")]
    GridTooSmall(f64),

    #[error("Fisher information estimate unstable under grid refinement: {fine:.6} vs {coarse:.6}")]
    UnstableEstimate { fine: f64, coarse: f64 },

    #[error("expected a positive value, got {0}")]
    NonPositive(f64),

    #[error("master-equation integration diverged after {halvings} step halvings (last dt {dt:.3e})")]
    IntegratorDiverged { halvings: usize, dt: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Whether the error comes from the numerics (as opposed to a bad request).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Leak { .. }
                | Error::IntegratorDiverged { .. }
                | Error::UnstableEstimate { .. }
                | Error::ZeroProbability(_)
                | Error::GridTooSmall(_)
        )
    }
}
