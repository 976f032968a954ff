use thiserror::Error;

/// Unified error type for the engine.
///
/// Every failure mode carries a human-readable context string; the variant
/// itself is what callers (CLI exit codes, FFI status codes) dispatch on.
#[derive(Debug, Error)]
pub enum Error {
    /// A ring element (or the constant term of a jet) has no inverse.
    #[error("not invertible: {0}")]
    NonInvertible(String),

    /// Two jets or symbols live at different base points or variable splits.
    #[error("base point mismatch: {0}")]
    BasePointMismatch(String),

    /// Coefficients of incompatible shape (matrix dimension) were combined.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A requested derivative or expansion order exceeds the valid order of
    /// the stored data.
    #[error("order exhausted: {0}")]
    OrderExhausted(String),

    /// A resummation cutoff asks for more coefficients than the symbol holds.
    #[error("truncation exceeds stored data: {0}")]
    TruncationExceedsData(String),

    /// Inputs violate a documented precondition.
    #[error("validation: {0}")]
    Validation(String),

    /// An inequality check failed; the message carries both sides.
    #[error("inequality violated: {0}")]
    InequalityViolated(String),

    /// A probe has zero norm and cannot be used in a quotient.
    #[error("degenerate probe: {0}")]
    DegenerateProbe(String),

    /// A certificate was requested for a symbol without growth constants.
    #[error("missing growth data: {0}")]
    MissingGrowthData(String),

    /// Certificates over different sample sets, windows, or parameters.
    #[error("incompatible certificates: {0}")]
    IncompatibleCertificates(String),

    /// Too few usable data points for a fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A contour node or gap endpoint sits on (or numerically near) the
    /// spectrum.
    #[error("on spectrum: {0}")]
    OnSpectrum(String),

    /// Contour quadrature failed to reach the target residual within the
    /// node-doubling budget.
    #[error("quadrature not converged: {0}")]
    QuadratureNotConverged(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI (also reused as the FFI status code):
    /// 2 validation, 3 numerical failure, 4 order exhaustion.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::OnSpectrum(_) | Error::QuadratureNotConverged(_) => 3,
            Error::OrderExhausted(_) | Error::TruncationExceedsData(_) => 4,
            _ => 2,
        }
    }
}
