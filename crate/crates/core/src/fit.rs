//! Weighted least squares for the variance parametrizations: per-length
//! linear fits `w = a − b/log N`, the hyperbolic asymptote of `α(h)`, the
//! variance predictor at the mesoscopic scale, and the pooled consistency
//! regression of `w` against `b(h)/log N`.

use statrs::consts::EULER_MASCHERONI;

use crate::ensemble::{classify_scale, SamplePoint, ScaleClass};
use crate::{Error, Result};

/// Result of one per-family linear fit `w = a − b/log N`.
#[derive(Debug, Clone)]
pub struct LinearFitResult {
    pub intercept_a: f64,
    pub slope_b: f64,
    /// Covariance of `(a, b)`; row/column 0 is the intercept. Zero in the
    /// intercept entries when the intercept was fixed.
    pub cov: [[f64; 2]; 2],
    pub chi2: f64,
    pub ndf: usize,
    pub h: u64,
    pub m: u64,
}

impl LinearFitResult {
    pub fn sigma_a(&self) -> f64 {
        self.cov[0][0].sqrt()
    }

    pub fn sigma_b(&self) -> f64 {
        self.cov[1][1].sqrt()
    }
}

/// Weighted least squares of `w` against `x = 1/log N`.
///
/// With `fix_intercept` the intercept is pinned to 1 and only `b` is
/// fitted (`ndf = n − 1`); otherwise both parameters are solved from the
/// closed-form normal equations (`ndf = n − 2`).
pub fn fit_linear(points: &[SamplePoint], fix_intercept: bool) -> Result<LinearFitResult> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "linear fit needs ≥ 3 points, got {}",
            points.len()
        )));
    }
    let (h, m) = (points[0].h, points[0].m);
    if points.iter().any(|p| p.h != h || p.m != m) {
        return Err(Error::InvalidArgument(
            "linear fit points must share the same (h, m)".into(),
        ));
    }
    if points
        .iter()
        .any(|p| !p.sigma_w.is_finite() || p.sigma_w <= 0.0)
    {
        return Err(Error::InvalidArgument("sigma_w must be positive".into()));
    }

    if fix_intercept {
        // minimize Σ ((w − 1 + b·x)/σ)²
        let sxx: f64 = points
            .iter()
            .map(|p| (p.inv_log_n / p.sigma_w).powi(2))
            .sum();
        if sxx <= 0.0 {
            return Err(Error::RankDeficient("all abscissas are zero".into()));
        }
        let sxy: f64 = points
            .iter()
            .map(|p| p.inv_log_n * (1.0 - p.w) / (p.sigma_w * p.sigma_w))
            .sum();
        let b = sxy / sxx;
        let chi2 = points
            .iter()
            .map(|p| ((p.w - (1.0 - b * p.inv_log_n)) / p.sigma_w).powi(2))
            .sum();
        return Ok(LinearFitResult {
            intercept_a: 1.0,
            slope_b: b,
            cov: [[0.0, 0.0], [0.0, 1.0 / sxx]],
            chi2,
            ndf: points.len() - 1,
            h,
            m,
        });
    }

    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for p in points {
        let wt = 1.0 / (p.sigma_w * p.sigma_w);
        s += wt;
        sx += wt * p.inv_log_n;
        sy += wt * p.w;
        sxx += wt * p.inv_log_n * p.inv_log_n;
        sxy += wt * p.inv_log_n * p.w;
    }
    let det = s * sxx - sx * sx;
    // Degenerate when all abscissas coincide; compare against the scale
    // of the matrix entries.
    if det.abs() <= 1e-12 * s * sxx {
        return Err(Error::RankDeficient(
            "degenerate abscissas: all 1/log N equal".into(),
        ));
    }
    // w = a + c·x with c = −b.
    let a = (sxx * sy - sx * sxy) / det;
    let c = (s * sxy - sx * sy) / det;
    let b = -c;
    let var_a = sxx / det;
    let var_c = s / det;
    let cov_ac = -sx / det;
    let chi2 = points
        .iter()
        .map(|p| ((p.w - (a - b * p.inv_log_n)) / p.sigma_w).powi(2))
        .sum();
    Ok(LinearFitResult {
        intercept_a: a,
        slope_b: b,
        // b = −c flips the sign of the cross term only.
        cov: [[var_a, -cov_ac], [-cov_ac, var_c]],
        chi2,
        ndf: points.len() - 2,
        h,
        m,
    })
}

/// One `(h, α(h))` point derived from a family slope via
/// `b(h) = 1 + α(h)·log h`.
#[derive(Debug, Clone, Copy)]
pub struct AlphaPoint {
    pub h: u64,
    pub alpha: f64,
    pub sigma_alpha: f64,
}

/// Inverts `b = 1 + α·log h`; undefined at `h = 1`.
pub fn alpha_from_slope(fit: &LinearFitResult) -> Result<AlphaPoint> {
    if fit.h <= 1 {
        return Err(Error::InvalidArgument(
            "α(h) is undefined at h = 1 (the Poisson-limit case)".into(),
        ));
    }
    let log_h = (fit.h as f64).ln();
    Ok(AlphaPoint {
        h: fit.h,
        alpha: (fit.slope_b - 1.0) / log_h,
        sigma_alpha: fit.sigma_b() / log_h,
    })
}

/// A derived scalar with first-order propagated uncertainty.
#[derive(Debug, Clone, Copy)]
pub struct ValueWithSigma {
    pub value: f64,
    pub sigma: f64,
}

/// Result of the hyperbolic fit `α(h) = (1 + α₁·log h)/(α₂ + log h)`.
#[derive(Debug, Clone)]
pub struct AlphaFitResult {
    pub alpha1: f64,
    pub alpha2: f64,
    pub cov: [[f64; 2]; 2],
    pub chi2: f64,
    pub ndf: usize,
    /// `2 − α₁α₂`, uncertainty propagated with the α₁–α₂ covariance term.
    pub derived_2_minus_a1a2: ValueWithSigma,
}

impl AlphaFitResult {
    /// Evaluates the fitted hyperbola at interval length `h`.
    pub fn alpha_at(&self, h: f64) -> f64 {
        let log_h = h.ln();
        (1.0 + self.alpha1 * log_h) / (self.alpha2 + log_h)
    }

    pub fn sigma_alpha1(&self) -> f64 {
        self.cov[0][0].sqrt()
    }

    pub fn sigma_alpha2(&self) -> f64 {
        self.cov[1][1].sqrt()
    }
}

/// Lower cut on `h` for hyperbolic-fit inputs: below this the condition
/// `h ≫ log N` fails and `α(h)` oscillates.
pub const ALPHA_FIT_H_MIN: u64 = 100;

const GN_MAX_ITERATIONS: usize = 200;
const GN_RELATIVE_TOLERANCE: f64 = 1e-10;

/// Weighted nonlinear least squares of `α(h) = (1 + α₁ log h)/(α₂ + log h)`
/// by damped Gauss–Newton from the initial guess `(1, 0.5)`.
///
/// Accepted steps never increase chi²; convergence is declared when the
/// relative parameter change drops below 10⁻¹⁰. Points must satisfy
/// `h > h_min` (reject-listed otherwise), with `h_min ≥ ALPHA_FIT_H_MIN`
/// as the default cut.
pub fn fit_alpha_hyperbolic(points: &[AlphaPoint], h_min: u64) -> Result<AlphaFitResult> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "hyperbolic fit needs ≥ 3 points, got {}",
            points.len()
        )));
    }
    let offenders: Vec<u64> = points.iter().map(|p| p.h).filter(|&h| h <= h_min).collect();
    if !offenders.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "points at h ≤ {h_min} rejected: {offenders:?}"
        )));
    }
    if points
        .iter()
        .any(|p| !p.sigma_alpha.is_finite() || p.sigma_alpha <= 0.0)
    {
        return Err(Error::InvalidArgument(
            "sigma_alpha must be positive".into(),
        ));
    }

    let logs: Vec<f64> = points.iter().map(|p| (p.h as f64).ln()).collect();
    let min_log = logs.iter().cloned().fold(f64::INFINITY, f64::min);

    let chi2_of = |a1: f64, a2: f64| -> f64 {
        points
            .iter()
            .zip(&logs)
            .map(|(p, &l)| {
                let f = (1.0 + a1 * l) / (a2 + l);
                ((p.alpha - f) / p.sigma_alpha).powi(2)
            })
            .sum()
    };

    let (mut a1, mut a2) = (1.0f64, 0.5f64);
    let mut chi2 = chi2_of(a1, a2);
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..GN_MAX_ITERATIONS {
        iterations += 1;
        // Normal equations of the linearized problem.
        let (mut m11, mut m12, mut m22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (p, &l) in points.iter().zip(&logs) {
            let denom = a2 + l;
            let f = (1.0 + a1 * l) / denom;
            let j1 = l / denom / p.sigma_alpha;
            let j2 = -(1.0 + a1 * l) / (denom * denom) / p.sigma_alpha;
            let r = (p.alpha - f) / p.sigma_alpha;
            m11 += j1 * j1;
            m12 += j1 * j2;
            m22 += j2 * j2;
            g1 += j1 * r;
            g2 += j2 * r;
        }
        let det = m11 * m22 - m12 * m12;
        if det.abs() <= 1e-14 * m11 * m22 {
            return Err(Error::RankDeficient(
                "hyperbolic fit normal equations are singular".into(),
            ));
        }
        let mut d1 = (m22 * g1 - m12 * g2) / det;
        let mut d2 = (m11 * g2 - m12 * g1) / det;

        // Damping: halve the step until chi² does not increase and the
        // pole −α₂ stays outside the fitted log-h range.
        let mut accepted = false;
        for _ in 0..40 {
            let (t1, t2) = (a1 + d1, a2 + d2);
            if t2 + min_log > 1e-9 {
                let c = chi2_of(t1, t2);
                if c <= chi2 {
                    let rel = (d1.hypot(d2)) / (1.0 + a1.hypot(a2));
                    a1 = t1;
                    a2 = t2;
                    chi2 = c;
                    accepted = true;
                    if rel < GN_RELATIVE_TOLERANCE {
                        converged = true;
                    }
                    break;
                }
            }
            d1 *= 0.5;
            d2 *= 0.5;
        }
        if !accepted {
            // No productive direction left: treat as converged at the
            // current minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }

    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            alpha1: a1,
            alpha2: a2,
            chi2,
        });
    }

    // Covariance from the weighted normal matrix at the solution.
    let (mut m11, mut m12, mut m22) = (0.0, 0.0, 0.0);
    for (p, &l) in points.iter().zip(&logs) {
        let denom = a2 + l;
        let j1 = l / denom / p.sigma_alpha;
        let j2 = -(1.0 + a1 * l) / (denom * denom) / p.sigma_alpha;
        m11 += j1 * j1;
        m12 += j1 * j2;
        m22 += j2 * j2;
    }
    let det = m11 * m22 - m12 * m12;
    if det.abs() <= 1e-14 * m11 * m22 {
        return Err(Error::RankDeficient(
            "hyperbolic fit covariance is singular at the optimum".into(),
        ));
    }
    let cov = [[m22 / det, -m12 / det], [-m12 / det, m11 / det]];

    // var(2 − α₁α₂) = α₂²·var(α₁) + α₁²·var(α₂) + 2α₁α₂·cov(α₁,α₂)
    let var_derived = a2 * a2 * cov[0][0] + a1 * a1 * cov[1][1] + 2.0 * a1 * a2 * cov[0][1];
    Ok(AlphaFitResult {
        alpha1: a1,
        alpha2: a2,
        cov,
        chi2,
        ndf: points.len() - 2,
        derived_2_minus_a1a2: ValueWithSigma {
            value: 2.0 - a1 * a2,
            sigma: var_derived.max(0.0).sqrt(),
        },
    })
}

/// Variant of [`fit_alpha_hyperbolic`] with `α₁` constrained to 1, leaving
/// only `α₂` free. Off the default path; used for the identification check
/// of the slope-law constant.
pub fn fit_alpha_hyperbolic_fixed_alpha1(
    points: &[AlphaPoint],
    h_min: u64,
) -> Result<AlphaFitResult> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "constrained hyperbolic fit needs ≥ 2 points, got {}",
            points.len()
        )));
    }
    let offenders: Vec<u64> = points.iter().map(|p| p.h).filter(|&h| h <= h_min).collect();
    if !offenders.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "points at h ≤ {h_min} rejected: {offenders:?}"
        )));
    }
    let logs: Vec<f64> = points.iter().map(|p| (p.h as f64).ln()).collect();
    let min_log = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    let chi2_of = |a2: f64| -> f64 {
        points
            .iter()
            .zip(&logs)
            .map(|(p, &l)| ((p.alpha - (1.0 + l) / (a2 + l)) / p.sigma_alpha).powi(2))
            .sum()
    };
    let mut a2 = 0.5f64;
    let mut chi2 = chi2_of(a2);
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..GN_MAX_ITERATIONS {
        iterations += 1;
        let (mut jtj, mut jtr) = (0.0f64, 0.0f64);
        for (p, &l) in points.iter().zip(&logs) {
            let denom = a2 + l;
            let j = -(1.0 + l) / (denom * denom) / p.sigma_alpha;
            let r = (p.alpha - (1.0 + l) / denom) / p.sigma_alpha;
            jtj += j * j;
            jtr += j * r;
        }
        if jtj <= 0.0 {
            return Err(Error::RankDeficient(
                "constrained fit has no curvature".into(),
            ));
        }
        let mut step = jtr / jtj;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = a2 + step;
            if trial + min_log > 1e-9 {
                let c = chi2_of(trial);
                if c <= chi2 {
                    let rel = step.abs() / (1.0 + a2.abs());
                    a2 = trial;
                    chi2 = c;
                    accepted = true;
                    if rel < GN_RELATIVE_TOLERANCE {
                        converged = true;
                    }
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            alpha1: 1.0,
            alpha2: a2,
            chi2,
        });
    }
    let mut jtj = 0.0f64;
    for (p, &l) in points.iter().zip(&logs) {
        let denom = a2 + l;
        let j = -(1.0 + l) / (denom * denom) / p.sigma_alpha;
        jtj += j * j;
    }
    let var_a2 = 1.0 / jtj;
    Ok(AlphaFitResult {
        alpha1: 1.0,
        alpha2: a2,
        cov: [[0.0, 0.0], [0.0, var_a2]],
        chi2,
        ndf: points.len() - 1,
        derived_2_minus_a1a2: ValueWithSigma {
            value: 2.0 - a2,
            sigma: var_a2.sqrt(),
        },
    })
}

/// First-order expansion of the fitted slope law:
/// `b(h) ≈ 2 − α₁α₂ + α₁·log h`, valid for `h > e^{α₂}`.
pub fn taylor_slope(fit: &AlphaFitResult, h: u64) -> f64 {
    debug_assert!((h as f64).ln() > fit.alpha2, "expansion domain is h > e^α₂");
    2.0 - fit.alpha1 * fit.alpha2 + fit.alpha1 * (h as f64).ln()
}

/// A predictor value tagged with whether `(h, N)` is in the mesoscopic
/// domain the prediction is derived for.
#[derive(Debug, Clone, Copy)]
pub struct MsEstimate {
    pub value: f64,
    /// False when the input is outside the mesoscopic scale; the value is
    /// still the formula evaluation, flagged rather than silent.
    pub mesoscopic: bool,
}

/// The variance prediction for prime counts in mesoscopic windows.
///
/// The constant is `γ_E + log 2π − 1`, computed from high-precision
/// constants rather than hard-coded digits. In the variance law it enters
/// with a minus sign:
/// `σ_p² ≈ (h/(log N)²)·[log(N/h) − B]`, equivalently
/// `w ≈ 1 − (log h + B)/log N`.
#[derive(Debug, Clone, Copy)]
pub struct MsPrediction {
    /// `B = γ_E + log 2π − 1 ≈ 1.4150927`.
    pub b_theoretical: f64,
}

impl Default for MsPrediction {
    fn default() -> Self {
        Self::new()
    }
}

impl MsPrediction {
    pub fn new() -> Self {
        Self {
            b_theoretical: EULER_MASCHERONI + (2.0 * std::f64::consts::PI).ln() - 1.0,
        }
    }

    /// Predicted normalized variance `w ≈ 1 − (log h + B)/log N`.
    pub fn predict_w(&self, n: u64, h: u64) -> MsEstimate {
        let log_n = (n as f64).ln();
        MsEstimate {
            value: 1.0 - ((h as f64).ln() + self.b_theoretical) / log_n,
            mesoscopic: classify_scale(h, n) == ScaleClass::Mesoscopic,
        }
    }

    /// Predicted count variance `σ_p² ≈ (h/(log N)²)·[log(N/h) − B]`.
    ///
    /// Identically `λ·predict_w` with `λ = h/log N`.
    pub fn predict_variance(&self, n: u64, h: u64) -> MsEstimate {
        let log_n = (n as f64).ln();
        let bracket = (n as f64 / h as f64).ln() - self.b_theoretical;
        MsEstimate {
            value: h as f64 / (log_n * log_n) * bracket,
            mesoscopic: classify_scale(h, n) == ScaleClass::Mesoscopic,
        }
    }
}

/// `w ≈ 1 − (log h + B)/log N` at the default constant.
pub fn ms_predict_w(n: u64, h: u64) -> MsEstimate {
    MsPrediction::new().predict_w(n, h)
}

/// `σ_p² ≈ (h/(log N)²)·[log(N/h) − B]` at the default constant.
pub fn ms_predict_variance(n: u64, h: u64) -> MsEstimate {
    MsPrediction::new().predict_variance(n, h)
}

/// Pooled consistency regression of `w` against `x = b(h)/log N`.
#[derive(Debug, Clone)]
pub struct Fig4Result {
    pub intercept_a: f64,
    pub slope: f64,
    /// Uncertainties scaled by `√(chi²/ndf)`: the per-point weights are
    /// relative, so the residual scatter sets the absolute scale.
    pub sigma_intercept: f64,
    pub sigma_slope: f64,
    pub chi2: f64,
    pub ndf: usize,
}

/// Regresses `w = A − slope·(b(h)/log N)` over points pooled across
/// families, each paired with its family's fitted `b`.
pub fn fig4_regression(points: &[(SamplePoint, LinearFitResult)]) -> Result<Fig4Result> {
    if points.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "consistency regression needs ≥ 10 points, got {}",
            points.len()
        )));
    }
    let mut hs: Vec<u64> = points.iter().map(|(p, _)| p.h).collect();
    hs.sort_unstable();
    hs.dedup();
    if hs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "consistency regression needs ≥ 3 distinct h, got {}",
            hs.len()
        )));
    }

    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (p, fam) in points {
        let x = fam.slope_b * p.inv_log_n;
        let wt = 1.0 / (p.sigma_w * p.sigma_w);
        s += wt;
        sx += wt * x;
        sy += wt * p.w;
        sxx += wt * x * x;
        sxy += wt * x * p.w;
    }
    let det = s * sxx - sx * sx;
    if det.abs() <= 1e-12 * s * sxx {
        return Err(Error::RankDeficient(
            "consistency regression abscissas are degenerate".into(),
        ));
    }
    let a = (sxx * sy - sx * sxy) / det;
    let c = (s * sxy - sx * sy) / det; // w = a + c·x, slope = −c
    let slope = -c;
    let chi2: f64 = points
        .iter()
        .map(|(p, fam)| {
            let x = fam.slope_b * p.inv_log_n;
            ((p.w - (a - slope * x)) / p.sigma_w).powi(2)
        })
        .sum();
    let ndf = points.len() - 2;
    let scale = (chi2 / ndf as f64).max(0.0);
    Ok(Fig4Result {
        intercept_a: a,
        slope,
        sigma_intercept: (sxx / det * scale).sqrt(),
        sigma_slope: (s / det * scale).sqrt(),
        chi2,
        ndf,
    })
}
