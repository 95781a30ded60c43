//! CSV/JSON writers and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliResult;

/// Fixed 17-significant-digit formatting, so reruns compare byte for byte.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write_to<W: Write>(&self, sink: W) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes to `path`, or to standard output when `None`.
    pub fn write(&self, path: Option<&Path>) -> CliResult<()> {
        match path {
            Some(p) => self.write_to(std::fs::File::create(p)?),
            None => self.write_to(std::io::stdout().lock()),
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Record written beside every output file as `<output>.manifest.json`.
#[derive(Serialize, serde::Deserialize, Debug)]
pub struct RunManifest {
    pub subcommand: String,
    /// Every parameter after defaults were applied.
    pub params: serde_json::Value,
    /// The resolved model, so the run does not depend on the model file staying put.
    pub model: Option<serde_json::Value>,
    pub seed: Option<u64>,
    pub version: String,
    /// Arguments as given; `replay` re-executes them from `cwd`.
    pub argv: Vec<String>,
    pub cwd: PathBuf,
    pub outputs: Vec<PathBuf>,
    pub threads: usize,
    #[serde(default)]
    pub notes: Vec<String>,
    pub wall_time_seconds: f64,
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

pub fn version_string() -> String {
    format!("strip-anderson {}", env!("CARGO_PKG_VERSION"))
}
