//! Run directories named by a hash of the command, resolved config and
//! input file contents. Files are always written whole.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// First 16 hex digits of the run hash.
pub fn run_hash(command: &str, cfg: &RunConfig) -> Result<String, CliError> {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    for p in cfg.input_paths() {
        let bytes = fs::read(p).map_err(|e| io(p, e))?;
        h.update([0]);
        h.update(Sha256::digest(&bytes));
    }
    Ok(hex(&h.finalize())[..16].to_string())
}

pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    pub fn create(command: &str, cfg: &RunConfig) -> Result<Self, CliError> {
        let path = cfg.output.join(format!("{command}-{}", run_hash(command, cfg)?));
        fs::create_dir_all(&path).map_err(|e| io(&path, e))?;
        let dir = RunDir { path };
        dir.json("config.json", cfg)?;
        Ok(dir)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let p = self.path.join(name);
        let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
        text.push('\n');
        fs::write(&p, text).map_err(|e| io(&p, e))
    }

    /// CSV with a header row; floats use shortest round-trip formatting.
    pub fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        let p = self.path.join(name);
        let mut w = csv::Writer::from_path(&p).map_err(|e| io(&p, e))?;
        w.write_record(header).map_err(|e| io(&p, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| io(&p, e))?;
        }
        w.flush().map_err(|e| io(&p, e))
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }
}

pub fn num(v: f64) -> String {
    format!("{v:?}")
}
