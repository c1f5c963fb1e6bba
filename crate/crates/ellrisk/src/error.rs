//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum EllError {
    /// A generator kind or normalizing constant was requested outside the
    /// parameter range where it exists (e.g. Student-t second cumulative
    /// constants need m > 4).
    #[error("shape constraint violated: {0}")]
    ShapeConstraint(String),

    /// Generator argument was negative beyond roundoff.
    #[error("negative generator argument u = {0}")]
    NegativeArgument(f64),

    /// Parameter outside the mathematical domain of a special function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quadrature did not converge to the requested tolerance.
    #[error("integral did not converge: {0}")]
    IntegralDiverged(String),

    /// Scale matrix is not symmetric positive definite.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular covariance matrix")]
    SingularCovariance,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Internal quantile solver failure; must not occur for valid inputs.
    #[error("root not bracketed in quantile search")]
    RootNotBracketed,

    /// Standardization produced a band with lower >= upper in some component.
    #[error("band inverted after standardization in component {0}")]
    BandInvertedAfterStandardization(usize),

    /// Band probability too small to condition on.
    #[error("empty band: probability {0:.3e} below 1e-12")]
    EmptyBand(f64),

    /// A diagonal truncated variance vanished; correlation undefined.
    #[error("degenerate variance in component {0}")]
    DegenerateVariance(usize),

    /// Monte-Carlo oracle accepted too few samples to estimate moments.
    #[error("too few accepted samples: {0} (need at least 100)")]
    TooFewAccepted(usize),

    #[error("invalid band: {0}")]
    InvalidBand(String),

    #[error("invalid rectangle: {0}")]
    InvalidRectangle(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, EllError>;

impl EllError {
    /// Stable machine-readable code for CLI error JSON.
    pub fn code(&self) -> &'static str {
        match self {
            EllError::ShapeConstraint(_) => "ShapeConstraintViolated",
            EllError::NegativeArgument(_) => "NegativeArgument",
            EllError::Domain(_) => "DomainError",
            EllError::IntegralDiverged(_) => "IntegralDiverged",
            EllError::NotPositiveDefinite => "NotPositiveDefinite",
            EllError::DimensionMismatch(_) => "DimensionMismatch",
            EllError::SingularCovariance => "SingularCovariance",
            EllError::InsufficientData(_) => "InsufficientData",
            EllError::RootNotBracketed => "RootNotBracketed",
            EllError::BandInvertedAfterStandardization(_) => "BandInvertedAfterStandardization",
            EllError::EmptyBand(_) => "EmptyBand",
            EllError::DegenerateVariance(_) => "DegenerateVariance",
            EllError::TooFewAccepted(_) => "TooFewAccepted",
            EllError::InvalidBand(_) => "InvalidBand",
            EllError::InvalidRectangle(_) => "InvalidRectangle",
            EllError::Parse(_) => "ParseError",
        }
    }
}
