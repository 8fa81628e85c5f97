//! CSV and JSON-lines artifacts with a reproducibility header.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// SHA-256 of the effective configuration serialized as JSON. The output
/// directory is left out so relocated runs hash the same.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut cfg = cfg.clone();
    cfg.output.dir.clear();
    let json = serde_json::to_string(&cfg).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// Collects CSV rows and JSON records for one command and writes them at the end.
pub struct Artifacts {
    command: &'static str,
    hash: String,
    seed: u64,
    columns: Vec<(&'static str, &'static str)>,
    rows: Vec<String>,
    records: Vec<String>,
}

impl Artifacts {
    /// `columns` pairs every CSV column with its unit.
    pub fn new(command: &'static str, cfg: &RunConfig, columns: &[(&'static str, &'static str)]) -> Self {
        Self {
            command,
            hash: config_hash(cfg),
            seed: cfg.seed,
            columns: columns.to_vec(),
            rows: Vec::new(),
            records: Vec::new(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.columns.len());
        self.rows.push(fields.join(","));
    }

    pub fn record<T: Serialize>(&mut self, value: &T) {
        self.records.push(serde_json::to_string(value).expect("record serializes"));
    }

    fn header(&self) -> String {
        let mut h = String::new();
        h.push_str(&format!("# kerrlab {}\n", env!("CARGO_PKG_VERSION")));
        h.push_str(&format!("# command: {}\n", self.command));
        h.push_str(&format!("# config_sha256: {}\n", self.hash));
        h.push_str(&format!("# seed: {}\n", self.seed));
        let units: Vec<String> = self.columns.iter().map(|(c, u)| format!("{c}[{u}]")).collect();
        h.push_str(&format!("# units: {}\n", units.join(" ")));
        let names: Vec<&str> = self.columns.iter().map(|(c, _)| *c).collect();
        h.push_str(&names.join(","));
        h.push('\n');
        h
    }

    pub fn csv_text(&self) -> String {
        let mut s = self.header();
        for r in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    /// Writes `<dir>/<command>.csv` and `<dir>/<command>.jsonl`.
    pub fn write(&self, dir: &Path) -> io::Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{}.csv", self.command));
        fs::write(&csv, self.csv_text())?;
        let jsonl = dir.join(format!("{}.jsonl", self.command));
        let mut f = fs::File::create(&jsonl)?;
        for r in &self.records {
            writeln!(f, "{r}")?;
        }
        Ok((csv, jsonl))
    }
}

pub fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.12e}")
    }
}
