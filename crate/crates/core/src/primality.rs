//! Per-integer deterministic primality testing, used as an independent
//! counting oracle for the segmented sieve.
//!
//! This module intentionally shares no code with [`crate::sieve`]: the two
//! paths must be able to disagree for the differential tests to mean
//! anything.

use crate::sieve::Window;
use crate::{Error, Result};

/// Upper bound on window ends accepted by the oracle: 10¹⁴ + 10¹⁰.
pub const ORACLE_MAX_END: u64 = 100_010_000_000_000;

/// Miller–Rabin bases deterministic for every n < 2⁶⁴
/// (Sinclair's seven-base set).
const MR_BASES: [u64; 7] = [2, 325, 9375, 28178, 450775, 9780504, 1795265022];

fn mul_mod(a: u64, b: u64, n: u64) -> u64 {
    ((a as u128 * b as u128) % n as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, n: u64) -> u64 {
    let mut acc = 1u64;
    a %= n;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, a, n);
        }
        a = mul_mod(a, a, n);
        e >>= 1;
    }
    acc
}

/// Deterministic primality test for any 64-bit integer.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'bases: for mut a in MR_BASES {
        a %= n;
        if a == 0 {
            continue;
        }
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

/// Counts primes in `window` by testing every integer individually.
///
/// Same contract as [`crate::sieve::count_primes`] but a completely
/// separate code path; intended for windows up to ~10⁷ wide.
pub fn count_primes_oracle(window: Window) -> Result<u64> {
    let end = window.end();
    if end > ORACLE_MAX_END {
        return Err(Error::InvalidArgument(format!(
            "oracle window end {end} exceeds supported bound {ORACLE_MAX_END}"
        )));
    }
    Ok((window.start()..end).filter(|&n| is_prime(n)).count() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_primes() {
        let primes: Vec<u64> = (0..100).filter(|&n| is_prime(n)).collect();
        assert_eq!(
            primes,
            vec![
                2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79,
                83, 89, 97
            ]
        );
    }

    #[test]
    fn known_composites() {
        // Carmichael numbers and strong-pseudoprime bait.
        for n in [561u64, 1105, 1729, 2465, 2821, 6601, 25326001, 3215031751] {
            assert!(!is_prime(n), "{n} is composite");
        }
    }

    #[test]
    fn known_large_primes() {
        for n in [
            999983u64,
            1_000_000_007,
            1_000_000_000_039,
            99_999_999_999_973,
        ] {
            assert!(is_prime(n), "{n} is prime");
        }
    }

    #[test]
    fn oracle_counts_two() {
        let w = Window::new(2, 1).unwrap();
        assert_eq!(count_primes_oracle(w).unwrap(), 1);
    }

    #[test]
    fn oracle_hundred_to_two_hundred() {
        let w = Window::new(100, 100).unwrap();
        assert_eq!(count_primes_oracle(w).unwrap(), 21);
    }

    #[test]
    fn oracle_rejects_out_of_range() {
        let w = Window::new(ORACLE_MAX_END, 1).unwrap();
        assert!(matches!(
            count_primes_oracle(w),
            Err(Error::InvalidArgument(_))
        ));
    }
}
