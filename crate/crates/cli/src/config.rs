//! Run configuration: a TOML file with dotted-key overrides from the
//! command line.

use std::path::{Path, PathBuf};

use hea_core::data::PreprocessConfig;
use hea_core::decomp::DecompositionMethod;
use hea_core::kernels::KernelSpec;
use hea_core::mehler::ProbeFamily;
use hea_core::pipeline::{Sweep, SyntheticData};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Parent of the per-run output directories; not part of the run's identity.
    #[serde(default = "default_output", skip_serializing)]
    pub output: PathBuf,
    pub data: DataSource,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub hea: HeaSection,
    pub target: Option<TargetSection>,
    #[serde(default)]
    pub eigenframework: FrameworkSection,
    #[serde(default)]
    pub empirical: EmpiricalSection,
    #[serde(default)]
    pub check: CheckSection,
    pub sweep: Option<Sweep>,
    pub probe: Option<ProbeSection>,
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticData),
    /// CSV or `HEAM` matrix, one sample per row. `dim`, when given, is
    /// checked against the file.
    File { path: PathBuf, dim: Option<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeaSection {
    pub modes: usize,
    pub max_degree: usize,
    pub truncation: Option<usize>,
}

impl Default for HeaSection {
    fn default() -> Self {
        HeaSection {
            modes: 2000,
            max_degree: 6,
            truncation: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetKind {
    /// A single Hermite mode given as `(dimension, order)` pairs.
    Hermite { alpha: Vec<(usize, u32)> },
    /// Random power-law coefficients over the Hermite eigensystem.
    Powerlaw { beta: f64 },
    /// Labels read from a one-column matrix file.
    Labels { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSection {
    #[serde(flatten)]
    pub kind: TargetKind,
    #[serde(default)]
    pub method: DecompositionMethod,
    /// Modes used to decompose the target.
    #[serde(default = "default_target_modes")]
    pub modes: usize,
    /// Leading rows used for decomposition and prediction; all by default.
    pub samples: Option<usize>,
}

fn default_target_modes() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameworkSection {
    pub ridge: f64,
    pub n_grid: Vec<f64>,
}

impl Default for FrameworkSection {
    fn default() -> Self {
        FrameworkSection {
            ridge: 1e-3,
            n_grid: (5..=11).map(|k| 2f64.powi(k)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmpiricalSection {
    pub trials: usize,
    pub test_size: usize,
}

impl Default for EmpiricalSection {
    fn default() -> Self {
        EmpiricalSection {
            trials: 20,
            test_size: 5000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    pub empirical_modes: usize,
    pub bins_per_decade: usize,
    /// Populated bins reported as the headline overlap.
    pub top_bins: usize,
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection {
            empirical_modes: 400,
            bins_per_decade: 2,
            top_bins: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub gamma: Vec<f64>,
    pub family: ProbeFamily,
    pub epsilons: Vec<f64>,
}

impl RunConfig {
    /// Parses `text` after applying `key.path=value` overrides.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut table: toml::Table = text.parse().map_err(|e| CliError::Config(format!("config: {e}")))?;
        for (key, raw) in overrides {
            set_path(&mut table, key, parse_value(raw))?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text, overrides)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.check_paths()?;
        Ok(cfg)
    }

    /// Makes input paths relative to the config file's directory absolute.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataSource::File { path, .. } = &mut self.data {
            fix(path);
        }
        if let Some(TargetSection {
            kind: TargetKind::Labels { path },
            ..
        }) = &mut self.target
        {
            fix(path);
        }
    }

    fn check_paths(&self) -> Result<(), CliError> {
        for p in self.input_paths() {
            if !p.is_file() {
                return Err(CliError::Config(format!("{}: no such file", p.display())));
            }
        }
        Ok(())
    }

    /// Files the run reads, in a fixed order.
    pub fn input_paths(&self) -> Vec<&Path> {
        let mut out = Vec::new();
        if let DataSource::File { path, .. } = &self.data {
            out.push(path.as_path());
        }
        if let Some(TargetSection {
            kind: TargetKind::Labels { path },
            ..
        }) = &self.target
        {
            out.push(path.as_path());
        }
        out
    }

    fn validate(&self) -> Result<(), CliError> {
        let grid = &self.eigenframework.n_grid;
        if grid.is_empty() || grid.iter().any(|n| !(n.is_finite() && *n > 0.0)) {
            return Err(CliError::Config("eigenframework.n_grid must hold positive sample sizes".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config("eigenframework.n_grid must be strictly increasing".into()));
        }
        if !(self.eigenframework.ridge.is_finite() && self.eigenframework.ridge >= 0.0) {
            return Err(CliError::Config("eigenframework.ridge must be nonnegative".into()));
        }
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
        }
        self.preprocess.validate()?;
        if let Some(k) = &self.kernel {
            k.validate()?;
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<&KernelSpec, CliError> {
        self.kernel.as_ref().ok_or_else(|| CliError::Config("missing [kernel] section".into()))
    }

    pub fn target(&self) -> Result<&TargetSection, CliError> {
        self.target.as_ref().ok_or_else(|| CliError::Config("missing [target] section".into()))
    }
}

/// TOML literal if it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key '{key}'")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override '{key}': '{part}' is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
