//! File writers. Everything written here is a deterministic function of its
//! arguments: no timestamps, no hash-map iteration order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    /// SHA-256 of the effective configuration as compact JSON.
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(command: &'static str, cfg: &RunConfig) -> Result<Self, CliError> {
        let bytes = serde_json::to_vec(cfg)?;
        Ok(Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: hex::encode(Sha256::digest(&bytes)),
            seed: cfg.seed,
        })
    }
}

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(path)
            .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", path.display())))?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        let p = self.path(name);
        fs::write(&p, text)?;
        Ok(p)
    }

    /// One JSON object per line: `header` first, then every record.
    pub fn jsonl<H: Serialize, T: Serialize>(&self, name: &str, header: &H, records: &[T]) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        let mut w = std::io::BufWriter::new(fs::File::create(&p)?);
        serde_json::to_writer(&mut w, header)?;
        w.write_all(b"\n")?;
        for r in records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(p)
    }

    /// CSV with an explicit header row, written even when `rows` is empty.
    pub fn csv<T: Serialize>(&self, name: &str, header: &[&str], rows: &[T]) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&p)?;
        w.write_record(header)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(p)
    }

    pub fn text(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        fs::write(&p, body)?;
        Ok(p)
    }
}
