//! The `fit` command: per-family linear fits, the slope-law points and
//! hyperbolic fit, the pooled consistency regression and the variance
//! predictor residuals, emitted both human-readable and as CSV.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use primespan::ensemble::{scatter_sigma, SamplePoint, SIGMA_W_FLOOR};
use primespan::fit::{
    alpha_from_slope, fig4_regression, fit_alpha_hyperbolic, fit_alpha_hyperbolic_fixed_alpha1,
    fit_linear, ms_predict_w, AlphaFitResult, AlphaPoint, Fig4Result, LinearFitResult,
    MsPrediction,
};

use crate::rows::{ScanRow, Source};

/// One line of the machine-readable fit report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReportRow {
    /// linear | alpha_point | alpha_fit | fig4 | ms_residual
    pub kind: String,
    pub source: String,
    pub h: u64,
    #[serde(rename = "N")]
    pub n: u64,
    pub m: u64,
    pub param: String,
    pub value: f64,
    pub sigma: f64,
    pub chi2: f64,
    pub ndf: u64,
}

/// A family excluded from fitting, with the reason.
#[derive(Debug, Clone)]
pub struct ExcludedFamily {
    pub source: Source,
    pub h: u64,
    pub m: u64,
    pub reason: String,
}

/// Everything the fit stage produces from one scan CSV.
#[derive(Debug, Default)]
pub struct FitReport {
    /// Fixed-intercept fit per family, keyed by (source, h, m).
    pub linear_fixed: Vec<(Source, LinearFitResult)>,
    /// Free-intercept check fits.
    pub linear_free: Vec<(Source, LinearFitResult)>,
    pub excluded: Vec<ExcludedFamily>,
    pub alpha_points: Vec<(Source, AlphaPoint)>,
    pub alpha_fit: Option<AlphaFitResult>,
    pub alpha_fit_constrained: Option<AlphaFitResult>,
    /// Reason the hyperbolic fit was skipped, if it was.
    pub alpha_skip_reason: Option<String>,
    pub fig4: Option<Fig4Result>,
    pub fig4_skip_reason: Option<String>,
    /// (row, predicted w, pull) per mesoscopic prime-source row.
    pub ms_residuals: Vec<(ScanRow, f64, f64)>,
}

fn sample_point(row: &ScanRow) -> SamplePoint {
    let w = row.w;
    SamplePoint {
        inv_log_n: 1.0 / (row.n as f64).ln(),
        w,
        sigma_w: (2.0 * row.eps_stat * w).max(SIGMA_W_FLOOR),
        h: row.h,
        m: row.m,
    }
}

/// Runs the whole fit stage over scan rows.
///
/// `alpha_h_min` is the lower h cut for slope-law points (families at or
/// below it keep their linear fits but stay out of the hyperbolic fit);
/// `constrain_alpha1` additionally runs the α₁ ≡ 1 variant.
pub fn run_fit(rows: &[ScanRow], alpha_h_min: u64, constrain_alpha1: bool) -> Result<FitReport> {
    let mut families: BTreeMap<(Source, u64, u64), Vec<&ScanRow>> = BTreeMap::new();
    for row in rows {
        families
            .entry((row.source, row.h, row.m))
            .or_default()
            .push(row);
    }

    let mut report = FitReport::default();
    for (&(source, h, m), family_rows) in &families {
        if family_rows.len() < 3 {
            report.excluded.push(ExcludedFamily {
                source,
                h,
                m,
                reason: format!("only {} N-points (need ≥ 3)", family_rows.len()),
            });
            continue;
        }
        let points: Vec<SamplePoint> = family_rows.iter().map(|r| sample_point(r)).collect();
        let fixed = fit_linear(&points, true)
            .with_context(|| format!("fixed-intercept fit for h={h}, m={m}"))?;
        let free = fit_linear(&points, false)
            .with_context(|| format!("free-intercept fit for h={h}, m={m}"))?;
        if h > 1 {
            report
                .alpha_points
                .push((source, alpha_from_slope(&fixed)?));
        }
        report.linear_fixed.push((source, fixed));
        report.linear_free.push((source, free));
    }

    // Hyperbolic fit on prime-source slope-law points above the h cut.
    let alpha_input: Vec<AlphaPoint> = report
        .alpha_points
        .iter()
        .filter(|(s, p)| *s == Source::Primes && p.h > alpha_h_min)
        .map(|(_, p)| *p)
        .collect();
    if alpha_input.len() >= 3 {
        match fit_alpha_hyperbolic(&alpha_input, alpha_h_min) {
            Ok(fit) => report.alpha_fit = Some(fit),
            Err(err @ primespan::Error::NonConvergence { .. }) => return Err(err.into()),
            Err(err) => report.alpha_skip_reason = Some(err.to_string()),
        }
        if constrain_alpha1 {
            report.alpha_fit_constrained =
                fit_alpha_hyperbolic_fixed_alpha1(&alpha_input, alpha_h_min).ok();
        }
    } else {
        report.alpha_skip_reason = Some(format!(
            "only {} usable slope-law points above h = {alpha_h_min} (need ≥ 3)",
            alpha_input.len()
        ));
    }

    // Pooled consistency regression over prime-source families.
    let mut fig4_points: Vec<(SamplePoint, LinearFitResult)> = Vec::new();
    for (source, fit) in &report.linear_fixed {
        if *source != Source::Primes {
            continue;
        }
        for row in &families[&(Source::Primes, fit.h, fit.m)] {
            fig4_points.push((sample_point(row), fit.clone()));
        }
    }
    if fig4_points.is_empty() {
        report.fig4_skip_reason = Some("no prime-source families".into());
    } else {
        match fig4_regression(&fig4_points) {
            Ok(fig4) => report.fig4 = Some(fig4),
            Err(err) => report.fig4_skip_reason = Some(err.to_string()),
        }
    }

    // Predictor residuals over mesoscopic prime rows. The pull denominator
    // is the sampling-scatter scale of w, not the fit weight.
    for row in rows {
        if row.source != Source::Primes || row.scale != "mesoscopic" {
            continue;
        }
        let predicted = ms_predict_w(row.n, row.h).value;
        let pull = (row.w - predicted) / scatter_sigma(row.w, row.m);
        report.ms_residuals.push(((*row).clone(), predicted, pull));
    }

    Ok(report)
}

/// Flattens the report into CSV rows.
pub fn report_rows(report: &FitReport) -> Vec<FitReportRow> {
    let mut out = Vec::new();
    let mut push = |kind: &str,
                    source: String,
                    h: u64,
                    n: u64,
                    m: u64,
                    param: &str,
                    value: f64,
                    sigma: f64,
                    chi2: f64,
                    ndf: u64| {
        out.push(FitReportRow {
            kind: kind.into(),
            source,
            h,
            n,
            m,
            param: param.into(),
            value,
            sigma,
            chi2,
            ndf,
        });
    };

    for (source, fit) in &report.linear_fixed {
        let ndf = fit.ndf as u64;
        push(
            "linear",
            source.to_string(),
            fit.h,
            0,
            fit.m,
            "b",
            fit.slope_b,
            fit.sigma_b(),
            fit.chi2,
            ndf,
        );
    }
    for (source, fit) in &report.linear_free {
        let ndf = fit.ndf as u64;
        push(
            "linear",
            source.to_string(),
            fit.h,
            0,
            fit.m,
            "a_free",
            fit.intercept_a,
            fit.sigma_a(),
            fit.chi2,
            ndf,
        );
        push(
            "linear",
            source.to_string(),
            fit.h,
            0,
            fit.m,
            "b_free",
            fit.slope_b,
            fit.sigma_b(),
            fit.chi2,
            ndf,
        );
    }
    for (source, point) in &report.alpha_points {
        push(
            "alpha_point",
            source.to_string(),
            point.h,
            0,
            0,
            "alpha",
            point.alpha,
            point.sigma_alpha,
            0.0,
            0,
        );
    }
    for (label, fit) in [
        ("alpha_fit", report.alpha_fit.as_ref()),
        (
            "alpha_fit_constrained",
            report.alpha_fit_constrained.as_ref(),
        ),
    ] {
        if let Some(fit) = fit {
            let ndf = fit.ndf as u64;
            let src = Source::Primes.to_string();
            push(
                label,
                src.clone(),
                0,
                0,
                0,
                "alpha1",
                fit.alpha1,
                fit.sigma_alpha1(),
                fit.chi2,
                ndf,
            );
            push(
                label,
                src.clone(),
                0,
                0,
                0,
                "alpha2",
                fit.alpha2,
                fit.sigma_alpha2(),
                fit.chi2,
                ndf,
            );
            push(
                label,
                src.clone(),
                0,
                0,
                0,
                "two_minus_a1a2",
                fit.derived_2_minus_a1a2.value,
                fit.derived_2_minus_a1a2.sigma,
                fit.chi2,
                ndf,
            );
            push(
                label,
                src,
                0,
                0,
                0,
                "b_theoretical",
                MsPrediction::new().b_theoretical,
                0.0,
                0.0,
                0,
            );
        }
    }
    if let Some(fig4) = &report.fig4 {
        let src = Source::Primes.to_string();
        push(
            "fig4",
            src.clone(),
            0,
            0,
            0,
            "A",
            fig4.intercept_a,
            fig4.sigma_intercept,
            fig4.chi2,
            fig4.ndf as u64,
        );
        push(
            "fig4",
            src,
            0,
            0,
            0,
            "slope",
            fig4.slope,
            fig4.sigma_slope,
            fig4.chi2,
            fig4.ndf as u64,
        );
    }
    for (row, predicted, pull) in &report.ms_residuals {
        push(
            "ms_residual",
            row.source.to_string(),
            row.h,
            row.n,
            row.m,
            "pull",
            *pull,
            scatter_sigma(row.w, row.m),
            0.0,
            0,
        );
        let _ = predicted;
    }
    out
}

pub fn write_report_csv(path: &Path, rows: &[FitReportRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Human-readable rendering of the fit stage.
pub fn render_text(report: &FitReport) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "== per-family linear fits (w = a − b/log N) ==");
    let _ = writeln!(
        s,
        "{:<8} {:>9} {:>8} {:>12} {:>10} {:>12} {:>10} {:>12}",
        "source", "h", "m", "b", "sigma_b", "a_free", "sigma_a", "chi2/ndf"
    );
    for ((source, fixed), (_, free)) in report.linear_fixed.iter().zip(&report.linear_free) {
        let _ = writeln!(
            s,
            "{:<8} {:>9} {:>8} {:>12.5} {:>10.4} {:>12.5} {:>10.4} {:>9.2}/{}",
            source.to_string(),
            fixed.h,
            fixed.m,
            fixed.slope_b,
            fixed.sigma_b(),
            free.intercept_a,
            free.sigma_a(),
            fixed.chi2,
            fixed.ndf
        );
    }
    for excluded in &report.excluded {
        let _ = writeln!(
            s,
            "excluded: source={} h={} m={}: {}",
            excluded.source, excluded.h, excluded.m, excluded.reason
        );
    }

    let _ = writeln!(s, "\n== slope-law points (alpha = (b−1)/log h) ==");
    for (source, p) in &report.alpha_points {
        let _ = writeln!(
            s,
            "{:<8} h={:<9} alpha = {:.6} ± {:.6}",
            source.to_string(),
            p.h,
            p.alpha,
            p.sigma_alpha
        );
    }

    let _ = writeln!(
        s,
        "\n== hyperbolic fit alpha(h) = (1 + a1·log h)/(a2 + log h) =="
    );
    match &report.alpha_fit {
        Some(fit) => {
            let _ = writeln!(s, "alpha1 = {:.5} ± {:.5}", fit.alpha1, fit.sigma_alpha1());
            let _ = writeln!(s, "alpha2 = {:.5} ± {:.5}", fit.alpha2, fit.sigma_alpha2());
            let _ = writeln!(
                s,
                "2 − a1·a2 = {:.5} ± {:.5}",
                fit.derived_2_minus_a1a2.value, fit.derived_2_minus_a1a2.sigma
            );
            let b = MsPrediction::new().b_theoretical;
            let _ = writeln!(
                s,
                "B = gamma_E + log(2π) − 1 = {b:.9} (computed; not the transposed digits 1.414509)",
            );
            let _ = writeln!(
                s,
                "difference (2 − a1·a2) − B = {:+.5}",
                fit.derived_2_minus_a1a2.value - b
            );
            let _ = writeln!(s, "chi2/ndf = {:.2}/{}", fit.chi2, fit.ndf);
        }
        None => {
            let _ = writeln!(
                s,
                "skipped: {}",
                report.alpha_skip_reason.as_deref().unwrap_or("unknown")
            );
        }
    }
    if let Some(fit) = &report.alpha_fit_constrained {
        let _ = writeln!(
            s,
            "constrained (a1 ≡ 1): alpha2 = {:.5} ± {:.5}, 2 − a2 = {:.5} ± {:.5}",
            fit.alpha2,
            fit.sigma_alpha2(),
            fit.derived_2_minus_a1a2.value,
            fit.derived_2_minus_a1a2.sigma
        );
    }

    let _ = writeln!(s, "\n== consistency regression w = A − slope·(b/log N) ==");
    match &report.fig4 {
        Some(fig4) => {
            let _ = writeln!(
                s,
                "A     = {:.6} ± {:.6}",
                fig4.intercept_a, fig4.sigma_intercept
            );
            let _ = writeln!(s, "slope = {:.6} ± {:.6}", fig4.slope, fig4.sigma_slope);
            let _ = writeln!(s, "chi2/ndf = {:.2}/{}", fig4.chi2, fig4.ndf);
        }
        None => {
            let _ = writeln!(
                s,
                "skipped: {}",
                report.fig4_skip_reason.as_deref().unwrap_or("unknown")
            );
        }
    }

    if !report.ms_residuals.is_empty() {
        let n = report.ms_residuals.len() as f64;
        let mean_abs: f64 = report
            .ms_residuals
            .iter()
            .map(|(_, _, p)| p.abs())
            .sum::<f64>()
            / n;
        let max_abs = report
            .ms_residuals
            .iter()
            .map(|(_, _, p)| p.abs())
            .fold(0.0f64, f64::max);
        let _ = writeln!(s, "\n== variance-predictor residuals (mesoscopic rows) ==");
        let _ = writeln!(
            s,
            "rows = {}, mean |pull| = {mean_abs:.3}, max |pull| = {max_abs:.3}",
            report.ms_residuals.len()
        );
    }
    s
}
