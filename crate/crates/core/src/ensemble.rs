//! Ensembles of `m` contiguous windows of length `h` centered about `N`,
//! their exact count statistics, error estimates and scale classification.

use num_rational::Ratio;
use num_traits::ToPrimitive;

use crate::sieve::Window;
use crate::{Error, Result};

/// Minimum weight assigned to a sample point, keeping fit weights finite.
pub const SIGMA_W_FLOOR: f64 = 1e-6;

/// Microscopic/mesoscopic boundary: `h < MICRO_FACTOR · log N` is
/// microscopic. At log N ≈ 20–30 this places the boundary near h ≈ 100–150,
/// matching the empirical cut below which `h ≫ log N` fails.
pub const MICRO_FACTOR: f64 = 5.0;

/// A set of `m` contiguous half-open windows of length `h` about `center_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleSpec {
    center_n: u64,
    interval_length_h: u64,
    interval_count_m: u64,
}

impl EnsembleSpec {
    /// Validates `h ≥ 1`, `m ≥ 2`, `center_n ≥ 3` and that the total span
    /// `ΔN = m·h` satisfies `ΔN < 2·center_n` (the set fits above 0).
    pub fn new(center_n: u64, interval_length_h: u64, interval_count_m: u64) -> Result<Self> {
        if interval_length_h < 1 {
            return Err(Error::InvalidArgument(
                "interval length h must be ≥ 1".into(),
            ));
        }
        if interval_count_m < 2 {
            return Err(Error::InvalidArgument(
                "interval count m must be ≥ 2".into(),
            ));
        }
        if center_n < 3 {
            return Err(Error::InvalidArgument(format!(
                "ensemble center N must be ≥ 3, got {center_n}"
            )));
        }
        let span = interval_length_h
            .checked_mul(interval_count_m)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "span m·h overflows: m={interval_count_m}, h={interval_length_h}"
                ))
            })?;
        if span as u128 >= 2 * center_n as u128 {
            return Err(Error::InvalidArgument(format!(
                "span m·h = {span} does not fit above 0 about N = {center_n} (need m·h < 2N)"
            )));
        }
        Ok(Self {
            center_n,
            interval_length_h,
            interval_count_m,
        })
    }

    pub fn center_n(&self) -> u64 {
        self.center_n
    }

    pub fn h(&self) -> u64 {
        self.interval_length_h
    }

    pub fn m(&self) -> u64 {
        self.interval_count_m
    }

    /// Total span `ΔN = m·h`.
    pub fn span(&self) -> u64 {
        self.interval_length_h * self.interval_count_m
    }

    /// Start of the first window: `N − ⌊m·h/2⌋`.
    pub fn first_window_start(&self) -> u64 {
        self.center_n - self.span() / 2
    }

    /// Exclusive end of the last window.
    pub fn span_end(&self) -> u64 {
        self.first_window_start() + self.span()
    }
}

/// The `m` contiguous windows tiling `[N − ⌊m·h/2⌋, N − ⌊m·h/2⌋ + m·h)`.
pub fn build_windows(spec: &EnsembleSpec) -> Vec<Window> {
    let first = spec.first_window_start();
    let h = spec.h();
    (0..spec.m())
        .map(|k| Window::new(first + k * h, h).expect("span fits u64 by construction"))
        .collect()
}

/// Scale regime of an `(h, N)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleClass {
    Microscopic,
    Mesoscopic,
    Macroscopic,
}

impl ScaleClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScaleClass::Microscopic => "microscopic",
            ScaleClass::Mesoscopic => "mesoscopic",
            ScaleClass::Macroscopic => "macroscopic",
        }
    }
}

impl std::fmt::Display for ScaleClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scale class plus the diagnostic ratios it was derived from.
#[derive(Debug, Clone, Copy)]
pub struct ScaleDiagnostics {
    pub class: ScaleClass,
    pub h_over_log_n: f64,
    pub log_h_over_log_n: f64,
}

/// Classifies `(h, N)`: macroscopic iff `h ≥ N`; microscopic iff
/// `h < MICRO_FACTOR·log N`; mesoscopic otherwise.
pub fn classify_scale(h: u64, n: u64) -> ScaleClass {
    debug_assert!(n >= 3 && h >= 1);
    if h >= n {
        return ScaleClass::Macroscopic;
    }
    if (h as f64) < MICRO_FACTOR * (n as f64).ln() {
        return ScaleClass::Microscopic;
    }
    ScaleClass::Mesoscopic
}

/// [`classify_scale`] together with the diagnostic ratios.
pub fn scale_diagnostics(h: u64, n: u64) -> ScaleDiagnostics {
    let log_n = (n as f64).ln();
    ScaleDiagnostics {
        class: classify_scale(h, n),
        h_over_log_n: h as f64 / log_n,
        log_h_over_log_n: (h as f64).ln() / log_n,
    }
}

/// Systematic error of assigning one central `N` to a set spanning `ΔN`.
#[derive(Debug, Clone, Copy)]
pub struct SystematicError {
    /// Exact relative error `Δλ/λ` with
    /// `Δλ = 2h·atanh(ΔN/2N) / (log(N+ΔN/2)·log(N−ΔN/2))`.
    pub exact: f64,
    /// First-order form `m·h/(N·log N)`.
    pub first_order: f64,
}

/// Relative systematic error of the ensemble mean, both forms.
pub fn systematic_error(spec: &EnsembleSpec) -> SystematicError {
    let n = spec.center_n() as f64;
    let span = spec.span() as f64;
    let log_n = n.ln();
    let half = span / 2.0;
    // Δλ/λ with λ = h/log N; h cancels.
    let exact = 2.0 * log_n * (half / n).atanh() / ((n + half).ln() * (n - half).ln());
    let first_order = span / (n * log_n);
    SystematicError { exact, first_order }
}

/// Relative statistical error `√(log N / (m·h))` of the ensemble mean.
pub fn statistical_error(spec: &EnsembleSpec) -> f64 {
    ((spec.center_n() as f64).ln() / spec.span() as f64).sqrt()
}

/// Exact-arithmetic summary of one ensemble's window counts.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    /// `⟨p⟩ = Σp/m`, exact.
    pub mean_count: Ratio<i128>,
    /// Population variance `σ_p² = Σp²/m − (Σp/m)²`, exact.
    pub variance_count: Ratio<i128>,
    /// `w = σ_p²/⟨p⟩`; `None` when the mean count is zero (undefined,
    /// distinct from 0).
    pub normalized_variance_w: Option<f64>,
    /// Expected mean `λ = h/log N`.
    pub lambda_expected: f64,
    /// Relative systematic error (exact form).
    pub eps_sys: f64,
    /// Relative statistical error.
    pub eps_stat: f64,
    pub scale: ScaleClass,
}

impl EnsembleStats {
    /// `⟨p⟩` as a double, for serialization.
    pub fn mean_f64(&self) -> f64 {
        self.mean_count.to_f64().unwrap_or(f64::NAN)
    }

    /// `σ_p²` as a double, for serialization.
    pub fn variance_f64(&self) -> f64 {
        self.variance_count.to_f64().unwrap_or(f64::NAN)
    }
}

/// Computes exact ensemble statistics from integer window counts.
///
/// Accumulates integer `Σp` and `Σp²` before any division, so the result
/// is independent of summation order and thread count.
pub fn compute_stats(spec: &EnsembleSpec, counts: &[u64]) -> Result<EnsembleStats> {
    if counts.len() as u64 != spec.m() {
        return Err(Error::InvalidArgument(format!(
            "expected {} counts, got {}",
            spec.m(),
            counts.len()
        )));
    }
    let m = spec.m() as i128;
    let mut sum: i128 = 0;
    let mut sum_sq: i128 = 0;
    for &c in counts {
        let c = c as i128;
        sum += c;
        sum_sq += c * c;
    }
    let mean_count = Ratio::new(sum, m);
    // σ² = Σp²/m − (Σp/m)² = (m·Σp² − (Σp)²)/m²
    let variance_count = Ratio::new(m * sum_sq - sum * sum, m * m);
    let normalized_variance_w = if sum > 0 {
        // w = σ²/⟨p⟩ = (m·Σp² − (Σp)²)/(m·Σp)
        Ratio::new(m * sum_sq - sum * sum, m * sum).to_f64()
    } else {
        None
    };
    let log_n = (spec.center_n() as f64).ln();
    Ok(EnsembleStats {
        mean_count,
        variance_count,
        normalized_variance_w,
        lambda_expected: spec.h() as f64 / log_n,
        eps_sys: systematic_error(spec).exact,
        eps_stat: statistical_error(spec),
        scale: classify_scale(spec.h(), spec.center_n()),
    })
}

/// One `(1/log N, w, σ_w)` point feeding the linear fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub inv_log_n: f64,
    pub w: f64,
    /// Fit weight input: `2·eps_stat·w`, floored at [`SIGMA_W_FLOOR`].
    pub sigma_w: f64,
    pub h: u64,
    pub m: u64,
}

/// Packages ensemble statistics into a fit point; errors when `w` is
/// undefined.
pub fn to_sample_point(stats: &EnsembleStats, spec: &EnsembleSpec) -> Result<SamplePoint> {
    let w = stats
        .normalized_variance_w
        .ok_or(Error::UndefinedVariance)?;
    Ok(SamplePoint {
        inv_log_n: 1.0 / (spec.center_n() as f64).ln(),
        w,
        sigma_w: (2.0 * stats.eps_stat * w).max(SIGMA_W_FLOOR),
        h: spec.h(),
        m: spec.m(),
    })
}

/// Absolute scatter scale of a measured `w`, for pull tests against
/// predictions.
///
/// The sampling noise of `w` is dominated by the variance estimator,
/// `sd(ŵ)/w ≈ √(2/m)` for `m` near-Gaussian counts; a factor 2 covers the
/// mild inflation from correlations between nearby windows. This is an
/// error scale, not a fit weight — fits use [`SamplePoint::sigma_w`].
pub fn scatter_sigma(w: f64, m: u64) -> f64 {
    2.0 * w * (2.0 / m as f64).sqrt()
}
