//! Empirical statistics of prime counts in short intervals.
//!
//! The library measures how many primes fall in ensembles of fixed-length
//! windows around large `N`, computes the normalized variance `w = σ²/⟨p⟩`
//! of those counts, and provides the fitting machinery (per-length linear
//! fits, the hyperbolic asymptote of their slopes, and the
//! Montgomery–Soundararajan variance predictor) together with a
//! Cramér-model Monte Carlo baseline.
//!
//! Modules:
//! - [`sieve`]: exact window prime counting via a segmented sieve.
//! - [`primality`]: an independent per-integer counting oracle
//!   (deterministic Miller–Rabin), used to cross-validate the sieve.
//! - [`ensemble`]: window ensembles about `N` and their exact statistics.
//! - [`cramer`]: Bernoulli random-prime simulation and Poisson-limit checks.
//! - [`fit`]: weighted least squares, the hyperbolic slope fit and the
//!   variance predictors.

pub mod cramer;
pub mod ensemble;
pub mod fit;
pub mod primality;
pub mod sieve;

mod error;

pub use error::{Error, Result};
