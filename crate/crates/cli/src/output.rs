//! Result files: CSV series, JSON documents and the run manifest.
//!
//! Commands build every output in memory first; [`write_outputs`] is the only
//! place that touches the file system.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliResult;

/// A named file body.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn json<T: Serialize>(name: impl Into<String>, value: &T) -> Self {
        let mut bytes = serde_json::to_vec_pretty(value).expect("result types serialize to JSON");
        bytes.push(b'\n');
        Self {
            name: name.into(),
            bytes,
        }
    }
}

/// Column-oriented numeric table.
pub struct Table {
    header: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new() -> Self {
        Self {
            header: Vec::new(),
            columns: Vec::new(),
        }
    }

    pub fn column(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        if let Some(first) = self.columns.first() {
            assert_eq!(first.len(), values.len(), "columns must have equal length");
        }
        self.header.push(name.into());
        self.columns.push(values);
        self
    }

    pub fn to_csv(&self, name: impl Into<String>) -> CliResult<Artifact> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        let rows = self.columns.first().map_or(0, Vec::len);
        for i in 0..rows {
            w.write_record(self.columns.iter().map(|c| format_number(c[i])))?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(Artifact {
            name: name.into(),
            bytes,
        })
    }
}

impl Default for Table {
    fn default() -> Self {
        Self::new()
    }
}

/// Shortest round-trip form; exponent notation outside [1e-4, 1e15).
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// One quantitative check with its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: String,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, target: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.into(),
            value,
            target: target.into(),
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub wall_time_s: f64,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
}

impl Manifest {
    pub fn new(command: impl Into<String>, config_hash: impl Into<String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config_hash.into(),
            wall_time_s: 0.0,
            files: Vec::new(),
            checks: Vec::new(),
        }
    }
}

/// Writes the artifacts and then `manifest.json` into `dir`.
pub fn write_outputs(dir: &Path, artifacts: &[Artifact], manifest: &mut Manifest) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(artifacts.len() + 1);
    manifest.files = artifacts.iter().map(|a| a.name.clone()).collect();
    for a in artifacts {
        let path = dir.join(&a.name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, &a.bytes)?;
        written.push(path);
    }
    let m = Artifact::json("manifest.json", manifest);
    let path = dir.join(&m.name);
    std::fs::write(&path, &m.bytes)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_exact_and_stable() {
        let t = Table::new()
            .column("time_ns", vec![0.0, 0.001, 1.0 / 3.0])
            .column("occupancy", vec![1e-300, f64::NAN, 0.5]);
        let a = t.to_csv("x.csv").unwrap();
        let text = String::from_utf8(a.bytes).unwrap();
        assert_eq!(text, "time_ns,occupancy\n0,1e-300\n0.001,NaN\n0.3333333333333333,0.5\n");
        for x in [1.0 / 3.0, -2.5e-7, 6.02e23, 1e-4] {
            assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    #[should_panic]
    fn ragged_columns_rejected() {
        let _ = Table::new().column("a", vec![1.0]).column("b", vec![1.0, 2.0]);
    }

    #[test]
    fn manifest_written_last() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("simulate", "abc");
        let arts = vec![Artifact {
            name: "sub/a.csv".into(),
            bytes: b"x\n1\n".to_vec(),
        }];
        let paths = write_outputs(dir.path(), &arts, &mut m).unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths[1].ends_with("manifest.json"));
        let back: Manifest = serde_json::from_slice(&std::fs::read(&paths[1]).unwrap()).unwrap();
        assert_eq!(back.files, vec!["sub/a.csv"]);
    }
}
