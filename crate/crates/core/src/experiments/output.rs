//! CSV tables and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{ExperimentError, ExperimentResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Real(f64),
    Int(i64),
    Flag(bool),
    Text(String),
}

impl Value {
    /// Reals in scientific notation with 17 significant digits.
    pub fn render(&self) -> String {
        match self {
            Value::Real(x) if x.is_nan() => "NaN".into(),
            Value::Real(x) if x.is_infinite() => if *x > 0.0 { "inf" } else { "-inf" }.into(),
            Value::Real(x) => format!("{x:.16e}"),
            Value::Int(i) => i.to_string(),
            Value::Flag(b) => b.to_string(),
            Value::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Real(x) => Some(*x),
            Value::Int(i) => Some(*i as f64),
            _ => None,
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}

impl From<u64> for Value {
    fn from(x: u64) -> Self {
        Value::Int(x as i64)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Flag(b)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.into())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric column by name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[j].as_f64().unwrap_or(f64::NAN)).collect())
    }

    pub fn flags(&self, name: &str) -> Option<Vec<bool>> {
        let j = self.column_index(name)?;
        Some(self.rows.iter().map(|r| matches!(r[j], Value::Flag(true))).collect())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, ExperimentError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Value::render)).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| ExperimentError::Io(e.into_error()))
    }
}

fn csv_err(e: csv::Error) -> ExperimentError {
    ExperimentError::Io(std::io::Error::other(e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub experiment: &'a str,
    pub seed: u64,
    pub version: &'static str,
    pub config: &'a serde_json::Value,
    /// SHA-256 of the canonical JSON of `{experiment, seed, config}`.
    pub input_hash: String,
    pub csv_sha256: String,
    pub rows: usize,
    pub violations: &'a [String],
    pub summary: &'a serde_json::Value,
}

pub fn input_hash(experiment: &str, seed: u64, config: &serde_json::Value) -> String {
    let canon = serde_json::json!({ "experiment": experiment, "seed": seed, "config": config });
    sha256_hex(canon.to_string().as_bytes())
}

/// Writes `<outdir>/<experiment>-<seed>.csv` and `.manifest.json`; returns
/// both paths.
pub fn write_artifacts(result: &ExperimentResult, outdir: &Path) -> Result<(PathBuf, PathBuf), ExperimentError> {
    fs::create_dir_all(outdir)?;
    let stem = format!("{}-{}", result.experiment, result.seed);
    let csv_path = outdir.join(format!("{stem}.csv"));
    let manifest_path = outdir.join(format!("{stem}.manifest.json"));
    let csv = result.table.to_csv()?;
    fs::write(&csv_path, &csv)?;
    let manifest = Manifest {
        experiment: &result.experiment,
        seed: result.seed,
        version: env!("CARGO_PKG_VERSION"),
        config: &result.config,
        input_hash: input_hash(&result.experiment, result.seed, &result.config),
        csv_sha256: sha256_hex(&csv),
        rows: result.table.rows.len(),
        violations: &result.violations,
        summary: &result.summary,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&manifest_path, text)?;
    Ok((csv_path, manifest_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.2242e-1, 1e-300, -7.5] {
            let s = Value::Real(x).render();
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(Value::Real(0.25).render(), "2.5000000000000000e-1");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["alpha", "ok"]);
        t.push(vec![0.5.into(), true.into()]);
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(text, "alpha,ok\n5.0000000000000000e-1,true\n");
        assert_eq!(t.column("alpha").unwrap(), vec![0.5]);
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
