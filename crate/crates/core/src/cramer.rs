//! Monte Carlo realization of the Cramér random-prime model: each integer
//! `x ≥ 3` is independently "prime" with probability `q = 1/log x`.
//!
//! Serves as the null baseline against which the real-prime variance is
//! compared.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::ensemble::{classify_scale, compute_stats, systematic_error, EnsembleSpec, ScaleClass};
use crate::sieve::{count_tiled, BasePrimeTable};
use crate::{Error, Result};

/// How the Bernoulli probability is assigned within a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QMode {
    /// `q = 1/log x` per integer `x` (default).
    Exact,
    /// `q = 1/log N` frozen across the whole set (the binomial case).
    Frozen,
}

/// Parameters of one Cramér simulation; the seed fully determines output.
#[derive(Debug, Clone, Copy)]
pub struct CramerConfig {
    pub q_mode: QMode,
    pub rng_seed: u64,
    pub spec: EnsembleSpec,
}

/// SplitMix64 step, used to derive independent per-window streams from
/// `(seed, window index)`.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn window_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index)))
}

/// Simulates the `m` window counts of `config.spec` under the model.
///
/// Each count is the sum of independent Bernoulli(`q(x)`) indicators over
/// the window's integers; window `k` draws from a stream derived from
/// `(seed, k)`, so results are independent of execution order.
pub fn simulate_counts(config: &CramerConfig) -> Result<Vec<u64>> {
    let spec = &config.spec;
    let first = spec.first_window_start();
    if first < 3 {
        return Err(Error::InvalidArgument(format!(
            "Cramér model needs all x ≥ 3 (q < 1); first window starts at {first}"
        )));
    }
    let h = spec.h();
    let frozen_q = 1.0 / (spec.center_n() as f64).ln();
    let mut counts = Vec::with_capacity(spec.m() as usize);
    for k in 0..spec.m() {
        let mut rng = window_rng(config.rng_seed, k);
        let lo = first + k * h;
        let mut c = 0u64;
        match config.q_mode {
            QMode::Frozen => {
                for _ in 0..h {
                    if rng.gen_bool(frozen_q) {
                        c += 1;
                    }
                }
            }
            QMode::Exact => {
                for x in lo..lo + h {
                    if rng.gen_bool(1.0 / (x as f64).ln()) {
                        c += 1;
                    }
                }
            }
        }
        counts.push(c);
    }
    Ok(counts)
}

/// Histogram of simulated window counts against the Poisson law
/// `P(k) = λᵏe^{−λ}/k!`.
#[derive(Debug, Clone)]
pub struct PoissonCheck {
    pub lambda: f64,
    /// Count value of the first bin; bin `i` holds count `k_min + i`.
    pub k_min: usize,
    /// Observed frequencies; the edge bins hold the folded tails.
    pub histogram: Vec<u64>,
    /// Expected frequencies `trials·P(k)`, tails folded into the edge bins.
    pub expected: Vec<f64>,
    pub chi2: f64,
    pub ndf: usize,
    pub chi2_pvalue: f64,
}

/// Minimum expected count per chi-squared bin; sparser bins are folded
/// into their neighbor so the chi-squared approximation holds.
pub const MIN_EXPECTED_PER_BIN: f64 = 5.0;

/// log x range the Poisson check samples over. The limit law is an
/// x → ∞ statement: at small x the model's counts are visibly
/// sub-Poisson (binomial variance deficit 1 − q, resolvable by chi²
/// already at 10⁴ trials), so the check probes the regime where
/// q = 1/log x ≲ 0.004 and the limit is actually in force.
const POISSON_LOG_X_LO: f64 = 230.0;
const POISSON_LOG_X_HI: f64 = 460.0;

/// Simulates `trials` model windows of length `round(λ·log x)` at `x`
/// spread geometrically over the limit regime, histograms the counts and
/// tests them against Poisson(λ) with a chi-squared statistic.
///
/// Bins with expected count below [`MIN_EXPECTED_PER_BIN`] are folded
/// into the first/last kept bin.
pub fn poisson_limit_check(lambda: f64, trials: u64, seed: u64) -> Result<PoissonCheck> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    if trials < 1000 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10³ trials, got {trials}"
        )));
    }

    let mut raw_counts = Vec::with_capacity(trials as usize);
    for j in 0..trials {
        let log_x = POISSON_LOG_X_LO
            + (POISSON_LOG_X_HI - POISSON_LOG_X_LO) * j as f64 / (trials - 1) as f64;
        let len = (lambda * log_x).round().max(1.0) as u64;
        // q = 1/log t is constant across the window to f64 resolution
        // (the window is vanishingly short next to x).
        let q = 1.0 / log_x;
        let mut rng = window_rng(seed, j);
        let mut c = 0u64;
        for _ in 0..len {
            if rng.gen_bool(q) {
                c += 1;
            }
        }
        raw_counts.push(c);
    }

    // Poisson pmf by upward recurrence, out to where the right tail is
    // negligible (expected count < 10⁻⁶·trials).
    let tiny = 1e-6 * trials as f64;
    let mut pmf = Vec::new();
    let mut p = (-lambda).exp();
    let mut k = 0usize;
    loop {
        pmf.push(p);
        if k as f64 >= lambda && p * trials as f64 <= tiny {
            break;
        }
        k += 1;
        p *= lambda / k as f64;
        if k > 10_000 {
            break; // unreachable for sane λ; guards the recurrence
        }
    }
    // Keep the contiguous range of counts whose expected frequency is at
    // least MIN_EXPECTED_PER_BIN; fold both tails into the edge bins so
    // every bin supports the chi-squared approximation.
    let expected_at = |k: usize| pmf[k] * trials as f64;
    let k_lo = (0..pmf.len())
        .find(|&k| expected_at(k) >= MIN_EXPECTED_PER_BIN)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "too few trials ({trials}) to resolve any bin at λ = {lambda}"
            ))
        })?;
    let k_hi = (k_lo..pmf.len())
        .take_while(|&k| expected_at(k) >= MIN_EXPECTED_PER_BIN)
        .last()
        .expect("k_lo qualifies");
    if k_hi == k_lo {
        return Err(Error::InvalidArgument(format!(
            "degenerate histogram: a single bin at λ = {lambda}, trials = {trials}"
        )));
    }

    let n_bins = k_hi - k_lo + 1;
    let mut expected: Vec<f64> = (k_lo..=k_hi).map(expected_at).collect();
    let below: f64 = pmf[..k_lo].iter().sum();
    let inside: f64 = pmf[k_lo..=k_hi].iter().sum();
    expected[0] += below * trials as f64;
    expected[n_bins - 1] += (1.0 - below - inside) * trials as f64;

    let mut histogram = vec![0u64; n_bins];
    for &c in &raw_counts {
        let idx = (c as usize).clamp(k_lo, k_hi) - k_lo;
        histogram[idx] += 1;
    }

    let chi2: f64 = histogram
        .iter()
        .zip(&expected)
        .map(|(&obs, &exp)| {
            let d = obs as f64 - exp;
            d * d / exp
        })
        .sum();
    let ndf = n_bins - 1; // λ is fixed, not estimated
    let dist = ChiSquared::new(ndf as f64).expect("ndf ≥ 1");
    let chi2_pvalue = 1.0 - dist.cdf(chi2);

    Ok(PoissonCheck {
        lambda,
        k_min: k_lo,
        histogram,
        expected,
        chi2,
        ndf,
        chi2_pvalue,
    })
}

/// Real-vs-model normalized variance on identical specs.
#[derive(Debug, Clone, Copy)]
pub struct VarianceRatio {
    pub w_real: f64,
    pub w_model: f64,
    /// `w_model / w_real`.
    pub ratio_observed: f64,
    /// `log N / log(N/h)`, the conjectured overestimation factor.
    pub ratio_conjectured: f64,
}

/// Runs the same ensemble on real primes and on the model and compares
/// the variance overestimation against `log N / log(N/h)`.
///
/// Requires a mesoscopic spec passing the systematic-error guard
/// (`eps_sys ≤ 10⁻³`).
pub fn variance_ratio_experiment(
    spec: &EnsembleSpec,
    table: &BasePrimeTable,
    config: &CramerConfig,
) -> Result<VarianceRatio> {
    if systematic_error(spec).exact > 1e-3 {
        return Err(Error::InvalidArgument(
            "spec fails the eps_sys ≤ 10⁻³ guard".into(),
        ));
    }
    if classify_scale(spec.h(), spec.center_n()) != ScaleClass::Mesoscopic {
        return Err(Error::InvalidArgument(
            "variance ratio experiment requires a mesoscopic (h, N)".into(),
        ));
    }
    let real_counts = count_tiled(spec.first_window_start(), spec.h(), spec.m(), table)?;
    let real = compute_stats(spec, &real_counts)?;
    let model_counts = simulate_counts(config)?;
    let model = compute_stats(spec, &model_counts)?;
    let w_real = real.normalized_variance_w.ok_or(Error::UndefinedVariance)?;
    let w_model = model
        .normalized_variance_w
        .ok_or(Error::UndefinedVariance)?;
    let n = spec.center_n() as f64;
    let h = spec.h() as f64;
    Ok(VarianceRatio {
        w_real,
        w_model,
        ratio_observed: w_model / w_real,
        ratio_conjectured: n.ln() / (n / h).ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    #[test]
    fn h1_frozen_counts_are_indicators() {
        let spec = EnsembleSpec::new(100_000_000, 1, 4000).unwrap();
        let config = CramerConfig {
            q_mode: QMode::Frozen,
            rng_seed: 7,
            spec,
        };
        let counts = simulate_counts(&config).unwrap();
        assert!(counts.iter().all(|&c| c <= 1));
        // Empirical mean → q within 3√(q/m).
        let q = 1.0 / 1e8f64.ln();
        let mean = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
        assert!((mean - q).abs() < 3.0 * (q / counts.len() as f64).sqrt());
    }

    #[test]
    fn seed_determinism() {
        let spec = EnsembleSpec::new(1_000_000, 50, 200).unwrap();
        let config = CramerConfig {
            q_mode: QMode::Exact,
            rng_seed: 99,
            spec,
        };
        let a = simulate_counts(&config).unwrap();
        let b = simulate_counts(&config).unwrap();
        assert_eq!(a, b);
        let other = simulate_counts(&CramerConfig {
            rng_seed: 100,
            ..config
        })
        .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn window_below_three_rejected() {
        // First window start = 5 − ⌊4·2/2⌋ = 1 < 3.
        let spec = EnsembleSpec::new(5, 2, 4).unwrap();
        let config = CramerConfig {
            q_mode: QMode::Exact,
            rng_seed: 1,
            spec,
        };
        assert!(simulate_counts(&config).is_err());
    }

    #[test]
    fn frozen_mode_matches_binomial_moments() {
        // mean → h·q and w → 1 − q within 3 standard errors (the window
        // counts are exactly Binomial(h, q) here).
        let (n, h, m) = (10_000_000_000u64, 1000u64, 10_000u64);
        let spec = EnsembleSpec::new(n, h, m).unwrap();
        let config = CramerConfig {
            q_mode: QMode::Frozen,
            rng_seed: 12345,
            spec,
        };
        let counts = simulate_counts(&config).unwrap();
        let stats = compute_stats(&spec, &counts).unwrap();
        let q = 1.0 / (n as f64).ln();
        let hq = h as f64 * q;
        let mean = stats.mean_count.to_f64().unwrap();
        // sd of the mean of m binomial(h, q) draws
        let sd_mean = (hq * (1.0 - q) / m as f64).sqrt();
        assert!((mean - hq).abs() < 3.0 * sd_mean, "mean {mean} vs {hq}");
        let w = stats.normalized_variance_w.unwrap();
        let sd_w = (2.0 / m as f64).sqrt() * (1.0 - q);
        assert!((w - (1.0 - q)).abs() < 3.0 * sd_w, "w {w} vs {}", 1.0 - q);
    }

    #[test]
    fn poisson_pmf_mass_at_zero() {
        let check = poisson_limit_check(1.0, 2000, 3).unwrap();
        let frac0 = check.expected[0] / 2000.0;
        assert!((frac0 - (-1.0f64).exp()).abs() < 1e-12);
        // Expected masses sum to the trial count (tail folded).
        let total: f64 = check.expected.iter().sum();
        assert!((total - 2000.0).abs() < 1e-6);
        let obs_total: u64 = check.histogram.iter().sum();
        assert_eq!(obs_total, 2000);
    }

    #[test]
    fn poisson_histogram_mean_near_lambda() {
        for lambda in [1.0, 5.0] {
            let trials = 20_000u64;
            let check = poisson_limit_check(lambda, trials, 11).unwrap();
            let mean: f64 = check
                .histogram
                .iter()
                .enumerate()
                .map(|(i, &n)| (check.k_min + i) as f64 * n as f64)
                .sum::<f64>()
                / trials as f64;
            assert!(
                (mean - lambda).abs() < 3.0 * (lambda / trials as f64).sqrt() + 0.01,
                "λ={lambda}: mean {mean}"
            );
        }
    }

    #[test]
    fn poisson_rejects_bad_arguments() {
        assert!(poisson_limit_check(0.0, 10_000, 1).is_err());
        assert!(poisson_limit_check(1.0, 10, 1).is_err());
    }
}
