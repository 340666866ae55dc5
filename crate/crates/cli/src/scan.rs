//! The scan engine: walks the (h, N) grid, counts primes (or simulates
//! the Cramér model), applies the systematic-error guard and produces
//! schema-stamped rows in configuration order.

use anyhow::{Context, Result};
use rayon::prelude::*;

use primespan::cramer::{simulate_counts, CramerConfig};
use primespan::ensemble::{compute_stats, systematic_error, EnsembleSpec};
use primespan::sieve::{build_base_primes, count_tiled, BasePrimeTable};

use crate::config::ScanConfig;
use crate::rows::{ScanRow, SkipRecord, Source, SCHEMA_VERSION};

/// Reject ensembles whose exact relative systematic error exceeds this;
/// the condition m·h ≪ N·log N concretely enforced.
pub const EPS_SYS_GUARD: f64 = 1e-3;

#[derive(Debug)]
pub struct ScanOutcome {
    pub rows: Vec<ScanRow>,
    pub skipped: Vec<SkipRecord>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Decorrelates the per-cell RNG stream from the scan seed and the cell
/// coordinates, so cells are independent of grid order.
fn cell_seed(seed: u64, h: u64, n: u64) -> u64 {
    splitmix64(seed ^ splitmix64(h) ^ splitmix64(n).rotate_left(17))
}

enum CellResult {
    Row(Box<ScanRow>),
    Skip(SkipRecord),
}

fn run_cell(
    n: u64,
    h: u64,
    cfg: &ScanConfig,
    source: Source,
    table: Option<&BasePrimeTable>,
) -> Result<CellResult> {
    let skip = |reason: String| {
        Ok(CellResult::Skip(SkipRecord {
            source,
            n,
            h,
            m: cfg.m,
            reason,
        }))
    };
    let spec = match EnsembleSpec::new(n, h, cfg.m) {
        Ok(spec) => spec,
        Err(err) => return skip(format!("invalid ensemble: {err}")),
    };
    let eps_sys = systematic_error(&spec).exact;
    if eps_sys > EPS_SYS_GUARD {
        return skip(format!(
            "eps_sys {eps_sys:.3e} exceeds guard {EPS_SYS_GUARD:.0e}"
        ));
    }
    let counts = match source {
        Source::Primes => {
            let table = table.expect("prime scans carry a base table");
            count_tiled(spec.first_window_start(), spec.h(), spec.m(), table)?
        }
        Source::Cramer => {
            let config = CramerConfig {
                q_mode: cfg.q_mode,
                rng_seed: cell_seed(cfg.seed, h, n),
                spec,
            };
            match simulate_counts(&config) {
                Ok(counts) => counts,
                Err(err) => return skip(format!("simulation rejected: {err}")),
            }
        }
    };
    let stats = compute_stats(&spec, &counts)?;
    let Some(w) = stats.normalized_variance_w else {
        return skip("undefined w: ensemble mean count is zero".into());
    };
    Ok(CellResult::Row(Box::new(ScanRow {
        schema_version: SCHEMA_VERSION,
        source,
        n,
        h,
        m: cfg.m,
        mean: stats.mean_f64(),
        variance: stats.variance_f64(),
        w,
        lambda: stats.lambda_expected,
        eps_sys: stats.eps_sys,
        eps_stat: stats.eps_stat,
        scale: stats.scale.to_string(),
    })))
}

/// Runs a full grid scan. Cells are processed in parallel but collected
/// in configuration order (h outer, N inner), so output is byte-identical
/// at any worker count.
pub fn run_scan(cfg: &ScanConfig, source: Source) -> Result<ScanOutcome> {
    let grid = cfg.n_grid();
    let cells: Vec<(u64, u64)> = cfg
        .h_list
        .iter()
        .flat_map(|&h| grid.iter().map(move |&n| (h, n)))
        .collect();

    let table = match source {
        Source::Primes => {
            // One table certifies every cell: limit = ⌈√(max span end)⌉.
            let max_end = cells
                .iter()
                .filter_map(|&(h, n)| {
                    let span = h.checked_mul(cfg.m)?;
                    Some(n.saturating_add(span / 2 + h))
                })
                .max()
                .unwrap_or(100);
            let limit = (max_end as f64).sqrt().ceil() as u64 + 1;
            Some(build_base_primes(limit.max(2)).context("building base-prime table")?)
        }
        Source::Cramer => None,
    };

    let results: Vec<Result<CellResult>> = cells
        .par_iter()
        .map(|&(h, n)| run_cell(n, h, cfg, source, table.as_ref()))
        .collect();

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for result in results {
        match result? {
            CellResult::Row(row) => rows.push(*row),
            CellResult::Skip(skip) => skipped.push(skip),
        }
    }
    Ok(ScanOutcome { rows, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScanConfig;

    #[test]
    fn guard_skips_oversized_cells() {
        let cfg = ScanConfig {
            h_list: vec![500_000],
            m: 100_000,
            n_start: 10_000_000,
            n_end: 10_000_000,
            n_points: 1,
            ..ScanConfig::default()
        };
        let outcome = run_scan(&cfg, Source::Cramer).unwrap();
        assert!(outcome.rows.is_empty());
        assert_eq!(outcome.skipped.len(), 1);
        assert!(outcome.skipped[0].reason.contains("invalid ensemble"));
    }

    #[test]
    fn guard_skips_eps_sys_violations() {
        // Span fits (m·h < 2N) but eps_sys is far above 10⁻³.
        let cfg = ScanConfig {
            h_list: vec![1000],
            m: 2000,
            n_start: 10_000_000,
            n_end: 10_000_000,
            n_points: 1,
            ..ScanConfig::default()
        };
        let outcome = run_scan(&cfg, Source::Cramer).unwrap();
        assert!(outcome.rows.is_empty());
        assert!(outcome.skipped[0].reason.contains("eps_sys"));
    }

    #[test]
    fn prime_scan_produces_ordered_rows() {
        let cfg = ScanConfig {
            h_list: vec![100, 200],
            m: 50,
            n_start: 1_000_000,
            n_end: 4_000_000,
            n_points: 3,
            ..ScanConfig::default()
        };
        let outcome = run_scan(&cfg, Source::Primes).unwrap();
        assert_eq!(outcome.rows.len(), 6);
        let hs: Vec<u64> = outcome.rows.iter().map(|r| r.h).collect();
        assert_eq!(hs, vec![100, 100, 100, 200, 200, 200]);
        let ns: Vec<u64> = outcome.rows.iter().take(3).map(|r| r.n).collect();
        assert!(ns.windows(2).all(|p| p[0] < p[1]));
        for row in &outcome.rows {
            assert!(row.w.is_finite() && row.mean > 0.0);
            assert_eq!(row.schema_version, SCHEMA_VERSION);
        }
    }

    #[test]
    fn cramer_scan_is_seed_deterministic() {
        let cfg = ScanConfig {
            h_list: vec![10],
            m: 100,
            n_start: 1_000_000,
            n_end: 2_000_000,
            n_points: 2,
            seed: 5,
            ..ScanConfig::default()
        };
        let a = run_scan(&cfg, Source::Cramer).unwrap();
        let b = run_scan(&cfg, Source::Cramer).unwrap();
        let wa: Vec<u64> = a.rows.iter().map(|r| r.w.to_bits()).collect();
        let wb: Vec<u64> = b.rows.iter().map(|r| r.w.to_bits()).collect();
        assert_eq!(wa, wb);
        let c = run_scan(
            &ScanConfig {
                seed: 6,
                ..cfg.clone()
            },
            Source::Cramer,
        )
        .unwrap();
        let wc: Vec<u64> = c.rows.iter().map(|r| r.w.to_bits()).collect();
        assert_ne!(wa, wc);
    }
}
