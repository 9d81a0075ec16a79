use thiserror::Error;

/// Errors produced by the accounting and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PtrError {
    /// A scale, probability or count was outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A Rényi order or privacy parameter fell outside the formula's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The PTR configuration violates a relation required by an analysis.
    #[error("configuration error: {0}")]
    Config(String),

    /// The white-box subsampled bound does not apply at this order.
    #[error("bound not applicable at alpha = {alpha}: {reason}")]
    BoundNotApplicable { alpha: f64, reason: String },

    /// Two curves were combined on different order grids.
    #[error("order grids differ ({left} vs {right} points, or mismatched values)")]
    GridMismatch { left: usize, right: usize },

    #[error("empty RDP curve")]
    EmptyCurve,

    /// A black-box formula needed epsilon at an integer order the curve lacks.
    #[error("curve has no value at order {0}")]
    MissingOrder(f64),

    #[error("unsupported audit: {0}")]
    UnsupportedAudit(String),

    /// Adaptive quadrature failed to reach tolerance.
    #[error("quadrature did not converge: estimated error {error:e} on [{a}, {b}]")]
    Quadrature { a: f64, b: f64, error: f64 },
}

impl PtrError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        PtrError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, PtrError::Quadrature { .. })
    }
}

pub type Result<T> = std::result::Result<T, PtrError>;
