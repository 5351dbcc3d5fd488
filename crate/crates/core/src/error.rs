use thiserror::Error;

/// Errors surfaced by the estimators and linear algebra kernels.
#[derive(Debug, Error)]
pub enum DoaError {
    /// Input violated a precondition (dimension, range, ordering).
    #[error("domain error: {0}")]
    Domain(String),
    /// A denominator or tracked matrix became numerically singular.
    #[error("singular system: {0}")]
    Singular(String),
    /// A matrix expected to be Hermitian deviated beyond tolerance.
    #[error("matrix not Hermitian within tolerance (relative deviation {0:.3e})")]
    NotHermitian(f64),
}

pub type Result<T> = std::result::Result<T, DoaError>;
