//! Scan configuration: presets, key-value config files and CLI overrides.

use std::path::Path;

use anyhow::{bail, Context, Result};
use primespan::cramer::QMode;

/// The three sample sizes plus the desk-scale default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// m = 2×10³, full interval-length list.
    SampleI,
    /// m = 10⁴, full interval-length list.
    SampleII,
    /// m = 10⁵, full interval-length list.
    SampleIII,
    /// m = 2×10³ with a reduced h list and a dense N grid; sized to finish
    /// in minutes on one machine.
    SampleIDesk,
    Custom,
}

impl Preset {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "sample-i" | "I" | "i" => Preset::SampleI,
            "sample-ii" | "II" | "ii" => Preset::SampleII,
            "sample-iii" | "III" | "iii" => Preset::SampleIII,
            "sample-i-desk" | "desk" => Preset::SampleIDesk,
            "custom" => Preset::Custom,
            other => bail!("unknown preset '{other}' (expected sample-i, sample-ii, sample-iii, sample-i-desk or custom)"),
        })
    }
}

/// Interval lengths used by the full samples.
pub const FULL_H_LIST: [u64; 12] = [
    1, 200, 500, 1000, 2000, 5000, 10_000, 20_000, 50_000, 100_000, 200_000, 500_000,
];

/// Interval lengths of the desk-scale preset.
pub const DESK_H_LIST: [u64; 8] = [200, 500, 1000, 2000, 5000, 10_000, 20_000, 50_000];

/// A fully resolved scan configuration.
#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub preset: Preset,
    pub h_list: Vec<u64>,
    pub m: u64,
    pub n_start: u64,
    pub n_end: u64,
    pub n_points: u32,
    pub seed: u64,
    pub q_mode: QMode,
    pub out: Option<String>,
    /// Lower h cut for points entering the hyperbolic fit.
    pub alpha_h_min: u64,
    /// Also run the α₁ ≡ 1 constrained variant of the hyperbolic fit.
    pub constrain_alpha1: bool,
    /// Input paths for `fit`/`report` when given through the config file.
    pub scan_csv: Option<String>,
    pub prime_csv: Option<String>,
    pub cramer_csv: Option<String>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            preset: Preset::Custom,
            h_list: vec![1000],
            m: 2000,
            n_start: 100_000_000,
            n_end: 1_000_000_000_000,
            n_points: 12,
            seed: 42,
            q_mode: QMode::Exact,
            out: None,
            alpha_h_min: 100,
            constrain_alpha1: false,
            scan_csv: None,
            prime_csv: None,
            cramer_csv: None,
        }
    }
}

impl ScanConfig {
    /// Applies a preset's sample size, h list and default grid.
    pub fn apply_preset(&mut self, preset: Preset) {
        self.preset = preset;
        match preset {
            Preset::SampleI => {
                self.m = 2000;
                self.h_list = FULL_H_LIST.to_vec();
            }
            Preset::SampleII => {
                self.m = 10_000;
                self.h_list = FULL_H_LIST.to_vec();
            }
            Preset::SampleIII => {
                self.m = 100_000;
                self.h_list = FULL_H_LIST.to_vec();
            }
            Preset::SampleIDesk => {
                self.m = 2000;
                self.h_list = DESK_H_LIST.to_vec();
                self.n_start = 100_000_000;
                self.n_end = 1_000_000_000_000;
                self.n_points = 240;
            }
            Preset::Custom => {}
        }
    }

    /// Geometric N grid (uniform in log N), rounded to integers with
    /// consecutive duplicates removed.
    pub fn n_grid(&self) -> Vec<u64> {
        if self.n_points <= 1 {
            return vec![self.n_start];
        }
        let ratio = self.n_end as f64 / self.n_start as f64;
        let mut grid: Vec<u64> = (0..self.n_points)
            .map(|i| {
                let t = i as f64 / (self.n_points - 1) as f64;
                (self.n_start as f64 * ratio.powf(t)).round() as u64
            })
            .collect();
        grid.dedup();
        grid
    }
}

/// Parses a non-negative integer, accepting scientific notation
/// (1e8, 2.5e10). Used for config keys and CLI flags alike.
pub fn parse_integer(value: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = value.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = value
        .parse()
        .map_err(|_| format!("cannot parse '{value}' as an integer"))?;
    if !(f.is_finite() && f >= 0.0 && f <= u64::MAX as f64 && f.fract() == 0.0) {
        return Err(format!("'{value}' is not a non-negative integer"));
    }
    Ok(f as u64)
}

fn parse_u64(value: &str, key: &str) -> Result<u64> {
    parse_integer(value).map_err(|e| anyhow::anyhow!("config key '{key}': {e}"))
}

/// Parses a `key = value` config file (one pair per line, `#` comments).
pub fn parse_config_file(path: &Path) -> Result<ScanConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut cfg = ScanConfig::default();

    // Presets first so explicit keys override them regardless of order.
    for (key, value) in config_pairs(&text)? {
        if key == "preset" {
            cfg.apply_preset(Preset::parse(&value)?);
        }
    }
    for (key, value) in config_pairs(&text)? {
        match key.as_str() {
            "preset" => {}
            "h_list" => {
                cfg.h_list = value
                    .split(',')
                    .map(|s| parse_u64(s.trim(), "h_list"))
                    .collect::<Result<Vec<u64>>>()?;
            }
            "m" => cfg.m = parse_u64(&value, "m")?,
            "n_start" => cfg.n_start = parse_u64(&value, "n_start")?,
            "n_end" => cfg.n_end = parse_u64(&value, "n_end")?,
            "n_points" => cfg.n_points = parse_u64(&value, "n_points")? as u32,
            "seed" => cfg.seed = parse_u64(&value, "seed")?,
            "q_mode" => {
                cfg.q_mode = match value.as_str() {
                    "exact" => QMode::Exact,
                    "frozen" => QMode::Frozen,
                    other => bail!("config key 'q_mode': expected exact or frozen, got '{other}'"),
                }
            }
            "out" => cfg.out = Some(value),
            "alpha_h_min" => cfg.alpha_h_min = parse_u64(&value, "alpha_h_min")?,
            "constrain_alpha1" => {
                cfg.constrain_alpha1 = match value.as_str() {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    other => {
                        bail!("config key 'constrain_alpha1': expected true/false, got '{other}'")
                    }
                }
            }
            "scan_csv" => cfg.scan_csv = Some(value),
            "prime_csv" => cfg.prime_csv = Some(value),
            "cramer_csv" => cfg.cramer_csv = Some(value),
            other => bail!("unknown config key '{other}'"),
        }
    }
    if cfg.n_start < 3 || cfg.n_end < cfg.n_start {
        bail!("need 3 ≤ n_start ≤ n_end");
    }
    Ok(cfg)
}

fn config_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(
                "config line {}: expected 'key = value', got '{raw}'",
                lineno + 1
            );
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}
