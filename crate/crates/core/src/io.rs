//! Matrix files (CSV and raw little-endian binary), checksums and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aligner::AlignmentConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    /// `u64` rows, `u64` cols, then `f64` entries in row-major order, all little-endian.
    RawBinary,
}

impl MatrixFormat {
    /// `.bin`/`.raw` are binary, everything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("raw") => Self::RawBinary,
            _ => Self::Csv,
        }
    }
}

fn parse_err(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        location: location.into(),
        message: message.into(),
    }
}

pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<DMatrix<f64>> {
    let bytes = fs::read(path)?;
    match format {
        MatrixFormat::Csv => parse_csv(&bytes, &path.display().to_string()),
        MatrixFormat::RawBinary => parse_binary(&bytes, &path.display().to_string()),
    }
}

/// Parses CSV text. A first row with any non-numeric cell is taken as a header.
pub fn parse_csv(bytes: &[u8], origin: &str) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(origin, e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(index as u64 + 1);
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: Vec<Option<f64>> = record.iter().map(|c| c.parse::<f64>().ok()).collect();
        if index == 0 && parsed.iter().any(Option::is_none) {
            continue; // header
        }
        let mut values = Vec::with_capacity(parsed.len());
        for (col, (cell, value)) in record.iter().zip(parsed).enumerate() {
            match value {
                Some(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(parse_err(
                        format!("{origin}: row {line}, column {}", col + 1),
                        format!("`{cell}` is not a finite number"),
                    ))
                }
            }
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(parse_err(
                    format!("{origin}: row {line}"),
                    format!("expected {w} fields, found {}", values.len()),
                ))
            }
            _ => {}
        }
        rows.push(values);
    }
    let Some(cols) = width else {
        return Err(parse_err(origin, "no data rows"));
    };
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), cols, &flat))
}

pub fn parse_binary(bytes: &[u8], origin: &str) -> Result<DMatrix<f64>> {
    let word = |offset: usize| -> Result<[u8; 8]> {
        bytes
            .get(offset..offset + 8)
            .map(|s| s.try_into().expect("slice of length 8"))
            .ok_or_else(|| {
                parse_err(
                    format!("{origin}: byte offset {offset}"),
                    format!("file truncated ({} bytes)", bytes.len()),
                )
            })
    };
    let rows = u64::from_le_bytes(word(0)?) as usize;
    let cols = u64::from_le_bytes(word(8)?) as usize;
    if rows == 0 || cols == 0 {
        return Err(parse_err(origin, format!("invalid dimensions {rows}x{cols}")));
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .and_then(|b| b.checked_add(16))
        .ok_or_else(|| parse_err(origin, "dimensions overflow"))?;
    if bytes.len() < expected {
        return Err(parse_err(
            format!("{origin}: byte offset {}", bytes.len()),
            format!("file truncated, expected {expected} bytes for {rows}x{cols}"),
        ));
    }
    if bytes.len() > expected {
        return Err(parse_err(
            format!("{origin}: byte offset {expected}"),
            format!("{} trailing bytes", bytes.len() - expected),
        ));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for i in 0..rows * cols {
        values.push(f64::from_le_bytes(word(16 + 8 * i)?));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// CSV with 17 significant digits, enough to round-trip every `f64`.
pub fn write_matrix_csv(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for row in a.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_matrix_binary(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(&(a.nrows() as u64).to_le_bytes())?;
    out.write_all(&(a.ncols() as u64).to_le_bytes())?;
    for row in a.row_iter() {
        for v in row.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_matrix(path: &Path, a: &DMatrix<f64>, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Csv => write_matrix_csv(path, a),
        MatrixFormat::RawBinary => write_matrix_binary(path, a),
    }
}

/// One column of values, `NA` for undefined entries.
pub fn write_optional_column(path: &Path, header: &str, values: &[Option<f64>]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{header}")?;
    for v in values {
        match v {
            Some(v) => writeln!(out, "{}", format_value(*v))?,
            None => writeln!(out, "NA")?,
        }
    }
    out.flush()?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Everything needed to rerun an invocation and audit its outcome.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub library_version: String,
    pub config: serde_json::Value,
    pub dist_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub phase_seconds: BTreeMap<String, f64>,
    pub input_checksums: BTreeMap<String, String>,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            dist_trace: Vec::new(),
            iterations_run: 0,
            converged: false,
            phase_seconds: BTreeMap::new(),
            input_checksums: BTreeMap::new(),
            notes: BTreeMap::new(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let sum = sha256_file(path)?;
        self.input_checksums.insert(path.display().to_string(), sum);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidInput(format!("manifest serialization: {e}")))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| parse_err(path.display().to_string(), e.to_string()))
    }
}

/// JSON echo of an alignment configuration.
pub fn config_echo(config: &AlignmentConfig) -> serde_json::Value {
    serde_json::json!({
        "tol": config.tol,
        "max_iterations": config.max_iterations,
        "scaling": config.scaling,
        "covariance_mode": config.covariance_mode,
        "epsilon1": config.epsilon1,
        "epsilon2": config.epsilon2,
        "max_covariance_iterations": config.max_covariance_iterations,
        "prior": config.prior.describe(),
        "k": config.prior.k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn csv_basic() {
        let m = parse_csv(b"1,2\n3,4", "t").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn csv_header_detected() {
        let m = parse_csv(b"a,b\n1,2\n3,4\n", "t").unwrap();
        assert_eq!(m.shape(), (2, 2));
    }

    #[test]
    fn csv_ragged_names_row() {
        let err = parse_csv(b"1,2\n3", "t").unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
    }

    #[test]
    fn csv_non_numeric_cell() {
        let err = parse_csv(b"1,2\n3,x\n", "t").unwrap_err().to_string();
        assert!(err.contains("row 2, column 2"), "{err}");
        assert!(parse_csv(b"1,2\n3,NaN\n", "t").is_err());
    }

    #[test]
    fn binary_roundtrip_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = DMatrix::from_fn(10, 7, |_, _| rng.random::<f64>() * 1e3 - 5e2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.bin");
        write_matrix_binary(&path, &a).unwrap();
        let b = load_matrix(&path, MatrixFormat::RawBinary).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn binary_truncation_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.bin");
        write_matrix_binary(&path, &DMatrix::from_element(3, 3, 1.5)).unwrap();
        let bytes = fs::read(&path).unwrap();
        let err = parse_binary(&bytes[..50], "t").unwrap_err().to_string();
        assert!(err.contains("offset 50"), "{err}");
        assert!(parse_binary(&bytes[..4], "t").is_err());
    }

    #[test]
    fn manifest_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("x.csv");
        fs::write(&input, "1,2\n").unwrap();
        let mut manifest = RunManifest::new("align", config_echo(&AlignmentConfig::default()));
        manifest.dist_trace = vec![0.5, 1e-7];
        manifest.record_input(&input).unwrap();
        let path = dir.path().join("manifest.json");
        manifest.write(&path).unwrap();
        let back = RunManifest::read(&path).unwrap();
        assert_eq!(back, manifest);
        assert_eq!(back.input_checksums.values().next().unwrap().len(), 64);
    }
}
