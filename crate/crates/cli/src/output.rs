//! CSV and manifest writers.
//!
//! Data files (CSV, skeleton JSON) are pure functions of (config, seed):
//! fixed column orders, fixed float formatting, no timestamps. The manifest
//! carries the timestamps and the pass/fail summary.

use crate::config::Config;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

/// Canonical float formatting for data files: 17 significant digits in
/// scientific notation round-trips every f64 and is locale-independent.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct CsvFile {
    path: PathBuf,
    buf: String,
}

impl CsvFile {
    pub fn new(dir: &Path, name: &str, header: &[&str]) -> Self {
        Self {
            path: dir.join(name),
            buf: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    /// Trailing comment line holding a JSON record (used for fit footers).
    pub fn footer(&mut self, label: &str, record: &Value) {
        self.buf.push_str(&format!("# {label} {record}\n"));
    }

    pub fn write(self) -> std::io::Result<String> {
        fs::write(&self.path, self.buf)?;
        Ok(self
            .path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default())
    }
}

/// Content hash of the canonical config, git-blob style over the bytes.
pub fn config_hash(canonical: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", canonical.len()));
    h.update(canonical);
    format!("{:x}", h.finalize())
}

fn now_utc() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_else(|_| "unknown".into())
}

pub struct Manifest {
    root: Map<String, Value>,
    started: String,
}

impl Manifest {
    pub fn start(config: &Config, canonical: &str, seed: u64, workers: usize) -> Self {
        let mut root = Map::new();
        root.insert("code_version".into(), json!(env!("CARGO_PKG_VERSION")));
        root.insert("config_echo".into(), json!(canonical));
        root.insert("config_hash".into(), json!(config_hash(canonical)));
        root.insert("experiment".into(), json!(config.name()));
        root.insert("rng_seed".into(), json!(seed));
        root.insert("workers".into(), json!(workers));
        Self {
            root,
            started: now_utc(),
        }
    }

    pub fn finish(
        mut self,
        dir: &Path,
        data_files: Vec<String>,
        summary: Value,
        pass: bool,
    ) -> std::io::Result<()> {
        self.root.insert("data_files".into(), json!(data_files));
        self.root.insert("summary".into(), summary);
        self.root.insert("pass".into(), json!(pass));
        self.root.insert("started".into(), json!(self.started));
        self.root.insert("finished".into(), json!(now_utc()));
        // serde_json's default map is ordered, so keys serialize sorted
        let text = serde_json::to_string_pretty(&Value::Object(self.root))
            .map_err(std::io::Error::other)?;
        fs::write(dir.join("manifest.json"), text + "\n")
    }
}
