//! Error type shared by all solver and table-building stages.

use thiserror::Error;

/// Unified error for geometry validation, sampling, linear algebra, and
/// quadrature failures. Numerical failures carry enough context to be
/// reported without re-running the offending stage.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid geometry or a point outside its admissible region.
    #[error("geometry: {0}")]
    Geometry(String),

    /// Configuration sampling could not satisfy its constraints.
    #[error("sampling: {0}")]
    Sampling(String),

    /// A constructed field violates one of its declared invariants.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A dense linear system was singular or too ill-conditioned to trust.
    #[error("singular system: {0}")]
    Singular(String),

    /// A quadrature refinement ladder failed to stabilize.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    /// A regression or tail fit was too poor to use.
    #[error("fit failed: {0}")]
    Fit(String),

    /// Cache files that are missing, corrupt, or built with other parameters.
    #[error("cache: {0}")]
    Cache(String),

    /// Too many solver failures inside an ensemble run.
    #[error("ensemble: {0}")]
    Ensemble(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
