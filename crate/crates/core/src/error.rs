use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors reported by the library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The base-prime table cannot certify counts for the requested window.
    #[error("base-prime table limit {limit} is insufficient for window end {window_end} (need limit² ≥ window end)")]
    InsufficientTable { limit: u64, window_end: u64 },

    /// The normalized variance is undefined (zero mean count).
    #[error("normalized variance undefined: ensemble mean count is zero")]
    UndefinedVariance,

    /// A least-squares system has no unique solution.
    #[error("rank-deficient fit: {0}")]
    RankDeficient(String),

    /// The iterative fit did not converge; carries the last iterate.
    #[error("fit did not converge after {iterations} iterations (last iterate α₁={alpha1}, α₂={alpha2}, chi2={chi2})")]
    NonConvergence {
        iterations: usize,
        alpha1: f64,
        alpha2: f64,
        chi2: f64,
    },
}
