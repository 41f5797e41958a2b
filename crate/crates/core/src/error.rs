use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong while building spaces, assembling or solving.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("point {value} lies outside the parametric interval [0, 1]")]
    OutOfDomain { value: f64 },

    #[error("unsupported degree {degree}: {reason}")]
    InvalidDegree { degree: usize, reason: &'static str },

    #[error("invalid refinement factor {0} (must be >= 1)")]
    InvalidRefinement(usize),

    #[error("quadrature order {0} outside the supported range 1..=30")]
    QuadratureOrder(usize),

    #[error("non-positive Jacobian determinant {det:e} at parametric point ({xi1}, {xi2})")]
    SingularJacobian { det: f64, xi1: f64, xi2: f64 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("Fourier mode m = 0 is not supported")]
    ZeroMode,

    #[error("dimension {dim} exceeds the dense cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("matrix dimensions do not match: {0}")]
    DimensionMismatch(String),

    #[error("mass matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("requested {requested} eigenpairs but only {available} remain after kernel filtering")]
    TooManyEigenpairs { requested: usize, available: usize },

    #[error("singular saddle-point system: {0}")]
    SingularSystem(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("argument out of validated range: {0}")]
    OutOfRange(String),

    #[error("no sign change found while bracketing root {index} of order {order}")]
    RootNotBracketed { order: u32, index: u32 },

    #[error("ambiguous eigenvalue matching: {0}")]
    AmbiguousMatch(String),

    #[error("manufactured-solution validation failed: {0}")]
    ManufacturedValidation(String),

    #[error("invalid configuration at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidKnots(_)
                | Error::OutOfDomain { .. }
                | Error::InvalidDegree { .. }
                | Error::InvalidRefinement(_)
                | Error::QuadratureOrder(_)
                | Error::InvalidGeometry(_)
                | Error::ZeroMode
                | Error::DimensionCap { .. }
                | Error::DimensionMismatch(_)
                | Error::OutOfRange(_)
                | Error::Config { .. }
                | Error::Io { .. }
                | Error::ManufacturedValidation(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
