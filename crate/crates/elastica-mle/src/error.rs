use thiserror::Error;

/// Unified error type for the crate.
///
/// The split matters to callers: `InvalidConfig`, `DimensionMismatch`,
/// `Precondition` and `DegenerateGrid` are caller mistakes caught up front;
/// `Stability`, `SingularGram`, `ZeroDenominator` and `EigenNoConvergence`
/// are numerical failures that depend on the data.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The explicit Euler scheme diverges (or is badly biased) once the
    /// step size crosses the stiffness limit of the fastest mode.
    #[error("unstable Euler step: h·θ₁ = {h_theta1:.6} exceeds 0.5; decrease the step size")]
    Stability { h_theta1: f64 },

    #[error("trajectory bundle does not carry noise increments; re-simulate with store_noise")]
    MissingNoise,

    /// The Gram matrix cannot be inverted reliably. Typical causes:
    /// coincident particles, a horizon too short to excite all modes, or a
    /// noiseless degenerate start.
    #[error("Gram matrix numerically singular (condition estimate {condition:.3e})")]
    SingularGram { condition: f64 },

    #[error("per-coordinate denominator {index} is not strictly positive")]
    ZeroDenominator { index: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("Jacobi eigensolver did not converge within {0} sweeps")]
    EigenNoConvergence(usize),

    #[error("requested {requested}×{requested} matrix exceeds the {cap}×{cap} cap")]
    SizeCap { requested: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
