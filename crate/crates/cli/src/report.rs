//! Report plumbing: the metadata block every JSON report embeds, and the
//! JSON/CSV writers.
//!
//! Outputs are deterministic: object keys serialize sorted, floats use either
//! serde_json's shortest round-trip form (JSON) or a fixed `{:.16e}` width
//! (CSV), and nothing records wall-clock time. Identical config and flags
//! therefore produce bit-identical artifacts.

use num_complex::Complex64;
use schlesinger_lab::CMatrix2;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Provenance block embedded under `"meta"` in every JSON report.
#[derive(Clone, Debug)]
pub struct Meta {
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub threads_cap: Option<usize>,
}

impl Meta {
    pub fn new(config_bytes: &[u8], seed: Option<u64>, threads_cap: Option<usize>) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(config_bytes);
        Self {
            config_sha256: format!("{:x}", hasher.finalize()),
            seed,
            threads_cap,
        }
    }

    pub fn to_value(&self) -> Value {
        json!({
            "tool": "schlesinger-lab",
            "version": env!("CARGO_PKG_VERSION"),
            "config_sha256": self.config_sha256,
            "seed": self.seed,
            "threads_cap": self.threads_cap,
        })
    }
}

pub fn cpx(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn mat(m: &CMatrix2) -> Value {
    serde_json::to_value(m).expect("2×2 matrices serialize")
}

/// Write a JSON report into `dir`, returning the path written.
pub fn write_json(dir: &Path, name: &str, value: &Value) -> io::Result<PathBuf> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

/// Write a CSV table into `dir`: mandatory header row, `{:.16e}` numbers,
/// empty cells where a value is absent.
pub fn write_csv(
    dir: &Path,
    name: &str,
    header: &[String],
    rows: &[Vec<Option<f64>>],
) -> io::Result<PathBuf> {
    let path = dir.join(name);
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len(), "row width matches header");
        let cells: Vec<String> = row
            .iter()
            .map(|cell| match cell {
                Some(x) => format!("{x:.16e}"),
                None => String::new(),
            })
            .collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    fs::write(&path, text)?;
    Ok(path)
}
