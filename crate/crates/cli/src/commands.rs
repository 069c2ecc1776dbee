//! One function per subcommand. Each reads the resolved config, runs the
//! library and writes its artifacts into a fresh run directory.

use std::path::PathBuf;

use hea_core::data::{estimate_covariance, powerlaw_target, CovarianceSpectrum, DataMatrix};
use hea_core::decomp::decompose_from_dataset_with;
use hea_core::eigensystem::build_eigensystem;
use hea_core::error::Error;
use hea_core::hermite::MultiIndex;
use hea_core::io::{read_labels, read_matrix, write_csv, write_heam};
use hea_core::kernels::{level_coefficients, KernelSpec};
use hea_core::krr::{empirical_learning_curve, CurveProtocol};
use hea_core::mehler::rate_probe;
use hea_core::par::Execution;
use hea_core::pipeline::{failure_sweep, hermite_labels, predict_learning_curve, PredictSettings, Sweep, SweepSetup};
use hea_core::spectral::{check_hea, HeaCheckConfig};
use serde::Serialize;

use crate::config::{DataSource, RunConfig, TargetKind};
use crate::error::CliError;
use crate::output::{num, RunDir};

/// Largest sample count diagonalized by `check-hea` and `failure-modes`.
pub const MAX_DIAGONALIZE: usize = 16384;

/// Loaded, preprocessed data with the spectrum used for Hermite labels.
struct Loaded {
    data: DataMatrix,
    spectrum: CovarianceSpectrum,
}

fn load_data(cfg: &RunConfig) -> Result<Loaded, CliError> {
    let (raw, truth) = match &cfg.data {
        DataSource::Synthetic(s) => {
            let (spectrum, x) = s.sample(cfg.seed)?;
            (x, Some(spectrum))
        }
        DataSource::File { path, dim } => {
            let x = read_matrix(path)?;
            if let Some(d) = dim {
                if x.ncols() != *d {
                    return Err(Error::Dimension {
                        expected: *d,
                        found: x.ncols(),
                    }
                    .into());
                }
            }
            (x, None)
        }
    };
    let default_preprocess = cfg.preprocess == Default::default();
    let data = cfg.preprocess.apply(&raw)?;
    let spectrum = match truth {
        Some(s) if default_preprocess => s,
        _ => estimate_covariance(&data, cfg.preprocess.center)?,
    };
    Ok(Loaded { data, spectrum })
}

fn labels(cfg: &RunConfig, loaded: &Loaded) -> Result<Vec<f64>, CliError> {
    let target = cfg.target()?;
    let y = match &target.kind {
        TargetKind::Hermite { alpha } => {
            let alpha = MultiIndex::new(alpha.iter().copied());
            if alpha.max_dim().is_some_and(|d| d >= loaded.data.ncols()) {
                return Err(CliError::Config(format!(
                    "target mode {alpha} exceeds data dimension {}",
                    loaded.data.ncols()
                )));
            }
            hermite_labels(&loaded.spectrum, &loaded.data, &alpha)?
        }
        TargetKind::Powerlaw { beta } => {
            let coeffs = level_coefficients(cfg.kernel()?, loaded.spectrum.radius(), truncation(cfg)?)?;
            let hea = build_eigensystem(&loaded.spectrum, &coeffs, cfg.hea.modes, cfg.hea.max_degree)?;
            powerlaw_target(&hea, &loaded.data, *beta, cfg.seed)?.values
        }
        TargetKind::Labels { path } => read_labels(path)?,
    };
    if y.len() != loaded.data.nrows() {
        return Err(Error::Dimension {
            expected: loaded.data.nrows(),
            found: y.len(),
        }
        .into());
    }
    Ok(y)
}

fn truncation(cfg: &RunConfig) -> Result<usize, CliError> {
    Ok(cfg
        .hea
        .truncation
        .unwrap_or_else(|| cfg.kernel.as_ref().map_or(cfg.hea.max_degree, |k| k.default_truncation()))
        .max(cfg.hea.max_degree))
}

/// Leading `target.samples` rows of the data and labels.
fn head(cfg: &RunConfig, data: &DataMatrix, y: &[f64]) -> Result<(DataMatrix, Vec<f64>), CliError> {
    let n = cfg.target()?.samples.unwrap_or(data.nrows());
    if n == 0 || n > data.nrows() {
        return Err(CliError::Config(format!(
            "target.samples must lie in 1..={}, got {n}",
            data.nrows()
        )));
    }
    let rows = data.to_row_major();
    let x = DataMatrix::from_row_major(n, data.ncols(), &rows[..n * data.ncols()])?;
    Ok((x, y[..n].to_vec()))
}

fn guard(n: usize) -> Result<(), CliError> {
    if n > MAX_DIAGONALIZE {
        return Err(CliError::Config(format!(
            "{n} samples exceed the diagonalization limit of {MAX_DIAGONALIZE}; subsample the data"
        )));
    }
    Ok(())
}

fn synthetic_only(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    match cfg.data {
        DataSource::Synthetic(_) => Ok(()),
        DataSource::File { .. } => Err(CliError::Config(format!("{command} needs a synthetic data source"))),
    }
}

#[derive(Serialize)]
struct PredictOutput<'a> {
    #[serde(flatten)]
    summary: hea_core::pipeline::PredictionSummary,
    kernel: &'a KernelSpec,
    ridge: f64,
    samples: usize,
}

pub fn predict_curve(cfg: &RunConfig, exec: Execution) -> Result<PathBuf, CliError> {
    let spec = cfg.kernel()?;
    let target = cfg.target()?;
    let loaded = load_data(cfg)?;
    let y = labels(cfg, &loaded)?;
    let (x, y) = head(cfg, &loaded.data, &y)?;
    let settings = PredictSettings {
        modes: cfg.hea.modes,
        max_degree: cfg.hea.max_degree,
        truncation: cfg.hea.truncation,
        target_modes: target.modes,
        method: target.method,
        ridge: cfg.eigenframework.ridge,
        n_grid: cfg.eigenframework.n_grid.clone(),
    };
    let report = predict_learning_curve(spec, &x, &y, &settings, exec)?;
    let summary = report.summary();
    eprintln!(
        "effective dimension {:.4}, radius {:.4}, coefficient truncation {}, {} modes{}",
        summary.effective_dimension,
        summary.radius,
        summary.coefficient_truncation,
        summary.modes,
        if summary.eigensystem_truncated { " (degree cap reached)" } else { "" }
    );
    let dir = RunDir::create("predict-curve", cfg)?;
    dir.csv(
        "predictions.csv",
        &["n", "kappa", "e0", "bias", "test_risk", "train_risk"],
        report
            .predictions
            .iter()
            .map(|p| vec![num(p.n), num(p.kappa), num(p.e0), num(p.bias), num(p.test_risk), num(p.train_risk)]),
    )?;
    dir.json(
        "summary.json",
        &PredictOutput {
            summary,
            kernel: spec,
            ridge: cfg.eigenframework.ridge,
            samples: x.nrows(),
        },
    )?;
    Ok(dir.path)
}

fn integer_grid(cfg: &RunConfig) -> Result<Vec<usize>, CliError> {
    cfg.eigenframework
        .n_grid
        .iter()
        .map(|&n| {
            if n.fract() == 0.0 && n >= 1.0 {
                Ok(n as usize)
            } else {
                Err(CliError::Config(format!("empirical curves need integer sample sizes, got {n}")))
            }
        })
        .collect()
}

pub fn empirical_curve(cfg: &RunConfig, exec: Execution) -> Result<PathBuf, CliError> {
    let spec = cfg.kernel()?;
    let loaded = load_data(cfg)?;
    let y = labels(cfg, &loaded)?;
    let protocol = CurveProtocol {
        n_grid: integer_grid(cfg)?,
        ridge: cfg.eigenframework.ridge,
        trials: cfg.empirical.trials,
        test_size: cfg.empirical.test_size,
        seed: cfg.seed,
    };
    let curve = empirical_learning_curve(spec, &loaded.data, &y, &protocol, exec)?;
    let dir = RunDir::create("empirical-curve", cfg)?;
    dir.csv(
        "empirical.csv",
        &["n", "mse_mean", "mse_stderr", "trials"],
        curve
            .points
            .iter()
            .map(|p| vec![p.n.to_string(), num(p.mse_mean), num(p.mse_stderr), p.trials.to_string()]),
    )?;
    dir.json("summary.json", &curve)?;
    Ok(dir.path)
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    top_bin_overlaps: Vec<(usize, f64)>,
    top_bin_overlap: f64,
    overlap: &'a hea_core::OverlapReport,
}

pub fn check(cfg: &RunConfig, exec: Execution) -> Result<PathBuf, CliError> {
    let spec = cfg.kernel()?;
    let loaded = load_data(cfg)?;
    guard(loaded.data.nrows())?;
    let check_cfg = HeaCheckConfig {
        modes: cfg.hea.modes,
        max_degree: cfg.hea.max_degree,
        truncation: truncation(cfg)?,
        empirical_modes: cfg.check.empirical_modes,
        bins_per_decade: cfg.check.bins_per_decade,
    };
    let report = check_hea(spec, &loaded.data, &check_cfg, exec)?;
    let dir = RunDir::create("check-hea", cfg)?;
    dir.csv(
        "scatter.csv",
        &["rank", "lambda_empirical", "lambda_theory", "degree"],
        report.scatter.iter().map(|r| {
            vec![
                r.rank.to_string(),
                num(r.lambda_empirical),
                num(r.lambda_theory),
                r.degree.to_string(),
            ]
        }),
    )?;
    dir.json(
        "overlap.json",
        &CheckOutput {
            top_bin_overlaps: report.overlap.top_bin_overlaps(cfg.check.top_bins),
            top_bin_overlap: report.overlap.top_bin_overlap(cfg.check.top_bins),
            overlap: &report.overlap,
        },
    )?;
    Ok(dir.path)
}

#[derive(Serialize)]
struct DecomposeOutput {
    method: hea_core::DecompositionMethod,
    sample_count: usize,
    modes: usize,
    noise_power: f64,
    total_power: f64,
}

pub fn decompose(cfg: &RunConfig, exec: Execution) -> Result<PathBuf, CliError> {
    let target = cfg.target()?;
    let loaded = load_data(cfg)?;
    let y = labels(cfg, &loaded)?;
    let (x, y) = head(cfg, &loaded.data, &y)?;
    let spectrum = estimate_covariance(&x, cfg.preprocess.center)?;
    let d = decompose_from_dataset_with(&x, &y, &spectrum, target.modes, cfg.hea.max_degree, target.method, exec)?;
    let dir = RunDir::create("decompose-target", cfg)?;
    dir.csv(
        "coefficients.csv",
        &["index", "mode", "degree", "coefficient"],
        d.modes.iter().zip(&d.coefficients).enumerate().map(|(i, (m, c))| {
            vec![i.to_string(), m.to_string(), m.degree().to_string(), num(*c)]
        }),
    )?;
    dir.json(
        "summary.json",
        &DecomposeOutput {
            method: d.method,
            sample_count: d.sample_count,
            modes: d.modes.len(),
            noise_power: d.noise_power,
            total_power: d.total_power(),
        },
    )?;
    Ok(dir.path)
}

pub fn failure_modes(cfg: &RunConfig, exec: Execution) -> Result<PathBuf, CliError> {
    synthetic_only(cfg, "failure-modes")?;
    let DataSource::Synthetic(data) = &cfg.data else { unreachable!() };
    guard(data.samples)?;
    let sweep = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("missing [sweep] section".into()))?;
    let setup = SweepSetup {
        data: data.clone(),
        check: HeaCheckConfig {
            modes: cfg.hea.modes,
            max_degree: cfg.hea.max_degree,
            truncation: cfg
                .hea
                .truncation
                .unwrap_or_else(|| match sweep {
                    Sweep::GaussianWidth { .. } => KernelSpec::Gaussian { sigma: 1.0 }.default_truncation(),
                    Sweep::EffectiveDimension { kernel, .. } => kernel.default_truncation(),
                })
                .max(cfg.hea.max_degree),
            empirical_modes: cfg.check.empirical_modes,
            bins_per_decade: cfg.check.bins_per_decade,
        },
        top_bins: cfg.check.top_bins,
        seed: cfg.seed,
    };
    let points = failure_sweep(sweep, &setup, exec)?;
    let dir = RunDir::create("failure-modes", cfg)?;
    dir.csv(
        "sweep.csv",
        &["parameter", "effective_dimension", "top_bin_overlap"],
        points
            .iter()
            .map(|p| vec![num(p.parameter), num(p.effective_dimension), num(p.top_bin_overlap)]),
    )?;
    dir.json("sweep.json", &points)?;
    Ok(dir.path)
}

pub fn probe(cfg: &RunConfig, exec: Execution) -> Result<PathBuf, CliError> {
    let p = cfg.probe.as_ref().ok_or_else(|| CliError::Config("missing [probe] section".into()))?;
    let report = rate_probe(&p.gamma, p.family, &p.epsilons, exec)?;
    let dir = RunDir::create("rate-probe", cfg)?;
    dir.csv(
        "rate.csv",
        &["epsilon", "max_eigval_rel_err", "max_principal_angle"],
        report
            .rows
            .iter()
            .map(|r| vec![num(r.epsilon), num(r.max_eigenvalue_rel_error), num(r.max_principal_angle)]),
    )?;
    dir.json("summary.json", &report)?;
    Ok(dir.path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum MatrixFormat {
    Csv,
    Heam,
}

#[derive(Serialize)]
struct GenOutput {
    samples: usize,
    dim: usize,
    effective_dimension: f64,
    gamma: Vec<f64>,
    labels: bool,
}

pub fn gen_data(cfg: &RunConfig, format: MatrixFormat) -> Result<PathBuf, CliError> {
    synthetic_only(cfg, "gen-data")?;
    let loaded = load_data(cfg)?;
    let y = match cfg.target {
        Some(_) => Some(labels(cfg, &loaded)?),
        None => None,
    };
    let command = match format {
        MatrixFormat::Csv => "gen-data-csv",
        MatrixFormat::Heam => "gen-data-heam",
    };
    let dir = RunDir::create(command, cfg)?;
    match format {
        MatrixFormat::Csv => write_csv(&dir.file("data.csv"), &loaded.data)?,
        MatrixFormat::Heam => write_heam(&dir.file("data.heam"), &loaded.data)?,
    }
    if let Some(y) = &y {
        write_csv(&dir.file("labels.csv"), &DataMatrix::from_row_major(y.len(), 1, y)?)?;
    }
    dir.json(
        "summary.json",
        &GenOutput {
            samples: loaded.data.nrows(),
            dim: loaded.data.ncols(),
            effective_dimension: loaded.spectrum.effective_dimension(),
            gamma: loaded.spectrum.eigenvalues().to_vec(),
            labels: y.is_some(),
        },
    )?;
    Ok(dir.path)
}
