use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument was outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series or iteration did not reach the requested tolerance.
    /// Carries the best value obtained and a bound on its absolute error.
    #[error("failed to converge: best value {value} with error bound {bound} > tol {tol}")]
    Convergence { value: f64, bound: f64, tol: f64 },

    /// A truncated distribution left more mass unaccounted for than allowed.
    #[error("truncation: deficit {deficit} exceeds cap {cap}")]
    Truncation { deficit: f64, cap: f64 },

    /// The result overflows f64; carries the natural log of the result.
    #[error("range error: result overflows, ln(result) = {log_value}")]
    Range { log_value: f64 },

    /// An arrival sequence was too short to determine the requested count.
    #[error("horizon {horizon} insufficient to determine the count at t = {t}")]
    InsufficientHorizon { horizon: f64, t: f64 },

    /// The operation does not apply to the given control variant.
    #[error("unsupported control: {0}")]
    UnsupportedControl(String),

    /// An internal invariant was violated; indicates a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    /// Binning too coarse or degenerate for the requested test.
    #[error("degenerate binning: {0}")]
    DegenerateBins(String),
}

pub type Result<T> = std::result::Result<T, Error>;
