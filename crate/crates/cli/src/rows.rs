//! The scan CSV schema, version-stamped per row.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Bump when the column set or meaning changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Primes,
    Cramer,
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Source::Primes => "primes",
            Source::Cramer => "cramer",
        })
    }
}

/// One scan measurement. Field order is the CSV column order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRow {
    pub schema_version: u32,
    pub source: Source,
    #[serde(rename = "N")]
    pub n: u64,
    pub h: u64,
    pub m: u64,
    pub mean: f64,
    pub variance: f64,
    pub w: f64,
    pub lambda: f64,
    pub eps_sys: f64,
    pub eps_stat: f64,
    pub scale: String,
}

/// A cell excluded by a guard, recorded in the sidecar file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkipRecord {
    pub source: Source,
    #[serde(rename = "N")]
    pub n: u64,
    pub h: u64,
    pub m: u64,
    pub reason: String,
}

pub fn write_rows(path: &Path, rows: &[ScanRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    if rows.is_empty() {
        // The header is part of the schema even when every cell was
        // guarded out.
        writer.write_record([
            "schema_version",
            "source",
            "N",
            "h",
            "m",
            "mean",
            "variance",
            "w",
            "lambda",
            "eps_sys",
            "eps_stat",
            "scale",
        ])?;
    }
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Sidecar next to the scan output; always written so reruns are
/// byte-comparable.
pub fn sidecar_path(out: &Path) -> std::path::PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".skipped.csv");
    out.with_file_name(name)
}

pub fn write_skips(path: &Path, skips: &[SkipRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    if skips.is_empty() {
        // Emit the header alone.
        writer.write_record(["source", "N", "h", "m", "reason"])?;
    }
    for skip in skips {
        writer.serialize(skip)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a scan CSV, enforcing the schema version on every row.
///
/// An empty file (or a bare header) yields an empty vector.
pub fn read_rows(path: &Path) -> Result<Vec<ScanRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        let row: ScanRow =
            record.with_context(|| format!("malformed row in {}", path.display()))?;
        if row.schema_version != SCHEMA_VERSION {
            bail!(
                "schema version mismatch in {}: found {}, this tool reads {}",
                path.display(),
                row.schema_version,
                SCHEMA_VERSION
            );
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row() -> ScanRow {
        ScanRow {
            schema_version: SCHEMA_VERSION,
            source: Source::Primes,
            n: 100_000_000,
            h: 1000,
            m: 2000,
            mean: 54.321,
            variance: 33.2,
            w: 0.6112,
            lambda: 54.28,
            eps_sys: 1e-6,
            eps_stat: 0.003,
            scale: "mesoscopic".into(),
        }
    }

    #[test]
    fn header_has_exact_column_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        write_rows(&path, &[sample_row()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            "schema_version,source,N,h,m,mean,variance,w,lambda,eps_sys,eps_stat,scale"
        );
    }

    #[test]
    fn roundtrip_preserves_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let rows = vec![sample_row(), {
            let mut r = sample_row();
            r.source = Source::Cramer;
            r.n = 999;
            r
        }];
        write_rows(&path, &rows).unwrap();
        let back = read_rows(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].w, rows[0].w);
        assert_eq!(back[1].source, Source::Cramer);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let mut row = sample_row();
        row.schema_version = 99;
        write_rows(&path, &[row]).unwrap();
        let err = read_rows(&path).unwrap_err().to_string();
        assert!(err.contains("schema version mismatch"), "{err}");
    }

    #[test]
    fn empty_file_reads_as_no_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "").unwrap();
        assert!(read_rows(&path).unwrap().is_empty());
    }
}
