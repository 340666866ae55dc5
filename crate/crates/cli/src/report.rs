//! The `report` command: one replication document combining a prime scan
//! and its Cramér baseline, with pass/fail verdicts on the headline
//! checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::Result;

use primespan::ensemble::scatter_sigma;
use primespan::fit::{ms_predict_w, MsPrediction};

use crate::fitcmd::{render_text, run_fit, FitReport};
use crate::rows::ScanRow;

/// Thresholds the report grades itself against.
pub mod thresholds {
    /// Per-row predictor pull bound.
    pub const MAX_PULL: f64 = 4.0;
    /// Bound on the mean |pull| across mesoscopic rows.
    pub const MEAN_PULL: f64 = 3.0;
    /// α₁ window around unity.
    pub const ALPHA1_LO: f64 = 0.97;
    pub const ALPHA1_HI: f64 = 1.03;
    /// |2 − α₁α₂ − 1.415| bound.
    pub const TWO_MINUS_TOL: f64 = 0.05;
    pub const TWO_MINUS_CENTER: f64 = 1.415;
    /// Consistency-regression windows, in fitted sigmas.
    pub const FIG4_NSIGMA: f64 = 3.0;
    /// Model-vs-prime divergence significance, in scatter sigmas.
    pub const DIVERGENCE_NSIGMA: f64 = 3.0;
}

#[derive(Debug, Clone)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug)]
pub struct Report {
    pub fit: FitReport,
    pub checks: Vec<CheckLine>,
    pub text: String,
}

fn check(checks: &mut Vec<CheckLine>, name: &str, passed: bool, detail: String) {
    checks.push(CheckLine {
        name: name.to_string(),
        passed,
        detail,
    });
}

/// Builds the replication report from prime rows and (possibly empty)
/// Cramér baseline rows.
pub fn build_report(
    prime_rows: &[ScanRow],
    cramer_rows: &[ScanRow],
    alpha_h_min: u64,
    constrain_alpha1: bool,
) -> Result<Report> {
    let fit = run_fit(prime_rows, alpha_h_min, constrain_alpha1)?;
    let mut checks = Vec::new();
    let mut s = String::new();

    let _ = writeln!(s, "================ replication report ================");
    let _ = writeln!(
        s,
        "prime rows: {}, model rows: {}",
        prime_rows.len(),
        cramer_rows.len()
    );
    let _ = writeln!(s);
    s.push_str(&render_text(&fit));

    // Predictor residuals verdict.
    if !fit.ms_residuals.is_empty() {
        let n = fit.ms_residuals.len() as f64;
        let mean_abs: f64 = fit
            .ms_residuals
            .iter()
            .map(|(_, _, p)| p.abs())
            .sum::<f64>()
            / n;
        let max_abs = fit
            .ms_residuals
            .iter()
            .map(|(_, _, p)| p.abs())
            .fold(0.0f64, f64::max);
        check(
            &mut checks,
            "predictor-pull",
            max_abs < thresholds::MAX_PULL && mean_abs < thresholds::MEAN_PULL,
            format!(
                "max |pull| = {max_abs:.2} (< {}), mean |pull| = {mean_abs:.2} (< {})",
                thresholds::MAX_PULL,
                thresholds::MEAN_PULL
            ),
        );
    }

    // Slope-law constant verdict.
    if let Some(alpha_fit) = &fit.alpha_fit {
        let a1_ok =
            alpha_fit.alpha1 >= thresholds::ALPHA1_LO && alpha_fit.alpha1 <= thresholds::ALPHA1_HI;
        check(
            &mut checks,
            "alpha1-near-unity",
            a1_ok,
            format!(
                "alpha1 = {:.5} ± {:.5} (window [{}, {}])",
                alpha_fit.alpha1,
                alpha_fit.sigma_alpha1(),
                thresholds::ALPHA1_LO,
                thresholds::ALPHA1_HI
            ),
        );
        // The constant is identified under α₁ ≡ 1 when that variant ran;
        // the free two-parameter fit trades the constant against α₁ and
        // is quoted alongside.
        let (identified, label) = match &fit.alpha_fit_constrained {
            Some(constrained) => (&constrained.derived_2_minus_a1a2, "a1 ≡ 1"),
            None => (&alpha_fit.derived_2_minus_a1a2, "free fit"),
        };
        check(
            &mut checks,
            "slope-law-constant",
            (identified.value - thresholds::TWO_MINUS_CENTER).abs() < thresholds::TWO_MINUS_TOL,
            format!(
                "2 − a1·a2 ({label}) = {:.4} ± {:.4} (target {} ± {}); free fit gives {:.4}",
                identified.value,
                identified.sigma,
                thresholds::TWO_MINUS_CENTER,
                thresholds::TWO_MINUS_TOL,
                alpha_fit.derived_2_minus_a1a2.value
            ),
        );
    }

    // Consistency regression verdict.
    if let Some(fig4) = &fit.fig4 {
        let a_ok = (fig4.intercept_a - 1.0).abs() < thresholds::FIG4_NSIGMA * fig4.sigma_intercept;
        let s_ok = (fig4.slope - 1.0).abs() < thresholds::FIG4_NSIGMA * fig4.sigma_slope;
        check(
            &mut checks,
            "consistency-regression",
            a_ok && s_ok,
            format!(
                "A − 1 = {:+.5} ± {:.5}, slope − 1 = {:+.5} ± {:.5}",
                fig4.intercept_a - 1.0,
                fig4.sigma_intercept,
                fig4.slope - 1.0,
                fig4.sigma_slope
            ),
        );
    }

    // Model-vs-prime table and divergence verdict.
    if cramer_rows.is_empty() {
        let _ = writeln!(s, "\n== model baseline ==");
        let _ = writeln!(s, "missing: no Cramér rows supplied; prime-only report");
    } else {
        let mut by_cell: BTreeMap<(u64, u64, u64), &ScanRow> = BTreeMap::new();
        for row in cramer_rows {
            by_cell.insert((row.n, row.h, row.m), row);
        }
        let _ = writeln!(s, "\n== model vs primes (matched cells) ==");
        let _ = writeln!(
            s,
            "{:>14} {:>9} {:>7} {:>9} {:>9} {:>10} {:>12} {:>12}",
            "N", "h", "m", "w_real", "w_model", "ratio_obs", "ratio_conj", "divergence"
        );
        let mut n_sig = 0usize;
        let mut n_matched = 0usize;
        for prime_row in prime_rows {
            let Some(model_row) = by_cell.get(&(prime_row.n, prime_row.h, prime_row.m)) else {
                continue;
            };
            n_matched += 1;
            let nf = prime_row.n as f64;
            let hf = prime_row.h as f64;
            let ratio_conj = nf.ln() / (nf / hf).ln();
            let ratio_obs = model_row.w / prime_row.w;
            let sigma = (scatter_sigma(prime_row.w, prime_row.m).powi(2)
                + scatter_sigma(model_row.w, model_row.m).powi(2))
            .sqrt();
            let significance = (model_row.w - prime_row.w) / sigma;
            if significance >= thresholds::DIVERGENCE_NSIGMA && prime_row.scale == "mesoscopic" {
                n_sig += 1;
            }
            let _ = writeln!(
                s,
                "{:>14} {:>9} {:>7} {:>9.5} {:>9.5} {:>10.4} {:>12.4} {:>11.1}σ",
                prime_row.n,
                prime_row.h,
                prime_row.m,
                prime_row.w,
                model_row.w,
                ratio_obs,
                ratio_conj,
                significance
            );
        }
        if n_matched > 0 {
            check(
                &mut checks,
                "model-overestimates-variance",
                n_sig > 0,
                format!(
                    "{n_sig}/{n_matched} matched mesoscopic cells diverge at ≥ {}σ",
                    thresholds::DIVERGENCE_NSIGMA
                ),
            );
        } else {
            let _ = writeln!(s, "(no matching cells between the two scans)");
        }
    }

    // Predictor residual table (per-h summary).
    if !fit.ms_residuals.is_empty() {
        let _ = writeln!(s, "\n== predictor residuals by family ==");
        let mut by_h: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for (row, _, pull) in &fit.ms_residuals {
            by_h.entry(row.h).or_default().push(*pull);
        }
        for (h, pulls) in by_h {
            let mean = pulls.iter().sum::<f64>() / pulls.len() as f64;
            let max = pulls.iter().map(|p| p.abs()).fold(0.0f64, f64::max);
            let _ = writeln!(
                s,
                "h={h:<9} rows={:<5} mean pull = {mean:+.3}, max |pull| = {max:.3}",
                pulls.len()
            );
        }
    }

    let b = MsPrediction::new().b_theoretical;
    let _ = writeln!(
        s,
        "\nB constant: {b:.9} = gamma_E + log(2π) − 1, computed from constants \
         (differs from the transposed rendering 1.414509 in the 4th decimal)"
    );

    let _ = writeln!(s, "\n== verdicts ==");
    for line in &checks {
        let _ = writeln!(
            s,
            "[{}] {}: {}",
            if line.passed { "PASS" } else { "FAIL" },
            line.name,
            line.detail
        );
    }

    Ok(Report {
        fit,
        checks,
        text: s,
    })
}

/// A quick one-cell predicted-w line, used by tests and examples.
pub fn predicted_w_line(n: u64, h: u64) -> String {
    let est = ms_predict_w(n, h);
    format!(
        "predicted w({n}, {h}) = {:.6}{}",
        est.value,
        if est.mesoscopic {
            ""
        } else {
            " (outside mesoscopic domain)"
        }
    )
}
