//! CSV and manifest writers.

use crate::error::Result;
use serde::Serialize;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Float with 17 significant digits, round-trip exact.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Buffered CSV writer with a fixed header.
pub struct CsvWriter {
    out: BufWriter<fs::File>,
    columns: usize,
    path: PathBuf,
}

impl CsvWriter {
    pub fn create(path: impl AsRef<Path>, header: &[&str]) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut out = BufWriter::new(fs::File::create(&path)?);
        writeln!(out, "{}", header.join(","))?;
        Ok(Self { out, columns: header.len(), path })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        debug_assert_eq!(fields.len(), self.columns);
        writeln!(self.out, "{}", fields.join(","))?;
        Ok(())
    }

    /// Flushes and returns the file path.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.out.flush()?;
        Ok(self.path)
    }
}

/// Provenance record written next to the outputs of a command.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub master_seed: Option<u64>,
    pub version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub metadata: serde_json::Value,
}

impl RunManifest {
    /// Writes `manifest.json` into `dir` via a temporary file and rename.
    pub fn write_atomic(&self, dir: &Path) -> Result<PathBuf> {
        let tmp = dir.join(".manifest.json.tmp");
        let dest = dir.join("manifest.json");
        fs::write(&tmp, serde_json::to_string_pretty(self)? + "\n")?;
        fs::rename(&tmp, &dest)?;
        Ok(dest)
    }
}
