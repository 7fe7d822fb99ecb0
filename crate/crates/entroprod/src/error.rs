use thiserror::Error;

/// Errors produced by the numerical engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: max |A - A^dag| = {deviation:.3e} exceeds {tol:.3e}")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("matrix is not unitary: max |U^dag U - I| = {deviation:.3e}")]
    NotUnitary { deviation: f64 },

    #[error("invalid density matrix: {reason}")]
    InvalidDensity { reason: String },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid inverse temperature beta = {beta}")]
    InvalidBeta { beta: f64 },

    #[error("{what} requires beta > 0")]
    BetaZero { what: &'static str },

    #[error("spectrum of H0 is degenerate (min gap {gap:.3e} <= {tol:.3e}); the infinitesimal-quench expansions assume a non-degenerate initial spectrum")]
    DegenerateSpectrum { gap: f64, tol: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("overlap matrix is not doubly stochastic: max row/column deviation {deviation:.3e}")]
    DoublyStochastic { deviation: f64 },

    #[error("cross-check failed for {what}: routes differ by {delta:.3e} (tolerance {tol:.3e})")]
    CrossCheck { what: &'static str, delta: f64, tol: f64 },

    #[error("{what} carries non-finite atoms with total probability {weight:.3e}")]
    InfiniteAtoms { what: String, weight: f64 },

    #[error("free-energy grid too coarse: {points} points (need at least 5)")]
    GridTooCoarse { points: usize },

    #[error("numerical invariant violated: {0}")]
    InvariantViolation(String),

    #[error("quadrature did not converge: node doubling changed {what} by {delta:.3e}")]
    QuadratureNotConverged { what: &'static str, delta: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
