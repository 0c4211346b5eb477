//! Result emission: a comma-separated table with a header row, and a
//! metadata sidecar (same basename, structured text) recording the config
//! hash, library version, tolerances and the constants the run derived.
//!
//! Tables are written with LF line endings and '.' decimal separators;
//! rerunning a config with the same seed reproduces the bytes exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thermoform::{Error, Result};

pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: Vec<&'static str>) -> Table {
        Table {
            headers,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.headers.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip float formatting: deterministic and parseable.
pub fn fmt_f64(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

/// Ordered key-value constants for the sidecar (insertion order is kept so
/// reruns serialize identically).
#[derive(Default)]
pub struct Constants {
    entries: Vec<(String, String)>,
}

impl Constants {
    pub fn put(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((key.to_string(), value.into()));
    }

    pub fn put_f64(&mut self, key: &str, value: f64) {
        self.put(key, fmt_f64(value));
    }
}

pub struct RunOutput {
    pub table: Table,
    pub constants: Constants,
}

pub struct Sidecar<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub config_text: &'a str,
    pub seed: u64,
    pub spectral_tol: f64,
    pub cylinder_depth: usize,
    pub truncation: usize,
}

pub fn write_outputs(base: &Path, output: &RunOutput, sidecar: &Sidecar<'_>) -> Result<(PathBuf, PathBuf)> {
    if let Some(parent) = base.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| Error::invalid_parameter("out", format!("cannot create {parent:?}: {e}")))?;
        }
    }
    let csv_path = base.with_extension("csv");
    let meta_path = base.with_extension("meta");
    fs::write(&csv_path, output.table.render())
        .map_err(|e| Error::invalid_parameter("out", format!("cannot write {csv_path:?}: {e}")))?;

    let mut hasher = Sha256::new();
    hasher.update(sidecar.config_text.as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }

    let mut meta = String::new();
    let _ = writeln!(meta, "command = \"{}\"", sidecar.command);
    let _ = writeln!(meta, "library_version = \"{}\"", sidecar.version);
    let _ = writeln!(meta, "config_sha256 = \"{hex}\"");
    let _ = writeln!(meta, "seed = {}", sidecar.seed);
    let _ = writeln!(meta);
    let _ = writeln!(meta, "[tolerances]");
    let _ = writeln!(meta, "spectral = {}", fmt_f64(sidecar.spectral_tol));
    let _ = writeln!(meta, "cylinder_depth = {}", sidecar.cylinder_depth);
    let _ = writeln!(meta, "truncation = {}", sidecar.truncation);
    let _ = writeln!(meta);
    let _ = writeln!(meta, "[constants]");
    for (k, v) in &output.constants.entries {
        let _ = writeln!(meta, "{k} = \"{v}\"");
    }
    fs::write(&meta_path, meta)
        .map_err(|e| Error::invalid_parameter("out", format!("cannot write {meta_path:?}: {e}")))?;
    Ok((csv_path, meta_path))
}
