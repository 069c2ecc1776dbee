//! End-to-end workflows: predicted learning curves from data statistics,
//! synthetic data generation and overlap sweeps over kernel width and
//! effective dimension.

use serde::{Deserialize, Serialize};

use crate::data::{
    estimate_covariance, exponent_for_effective_dimension, powerlaw_spectrum, sample_gaussian, CovarianceSpectrum,
    DataMatrix,
};
use crate::decomp::{decompose_from_dataset_with, DecompositionMethod, TargetDecomposition};
use crate::eigensystem::{build_eigensystem, HermiteEigensystem};
use crate::error::{input, Result, StageExt};
use crate::framework::{learning_curve_prediction_with, RiskPrediction, TaskSpectrum};
use crate::hermite::{multi_hermite, pca_coordinates, MultiIndex};
use crate::kernels::{level_coefficients, sphere_series, KernelSpec, LevelCoefficients};
use crate::par::Execution;
use crate::spectral::{check_hea, HeaCheckConfig};

/// Gaussian data with `γ_i ∝ (i + offset)^{-exponent}` scaled to `total`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticData {
    pub dim: usize,
    pub samples: usize,
    pub exponent: f64,
    #[serde(default)]
    pub offset: f64,
    #[serde(default = "one")]
    pub total: f64,
}

fn one() -> f64 {
    1.0
}

impl SyntheticData {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.samples == 0 {
            return input("synthetic data needs positive dimension and sample count");
        }
        if !(self.exponent.is_finite() && self.exponent >= 0.0) {
            return input("spectrum exponent must be finite and nonnegative");
        }
        if !(self.offset.is_finite() && self.offset > -1.0) {
            return input("spectrum offset must exceed -1");
        }
        if !(self.total.is_finite() && self.total > 0.0) {
            return input("spectrum total must be positive");
        }
        Ok(())
    }

    pub fn spectrum(&self) -> Result<CovarianceSpectrum> {
        self.validate()?;
        CovarianceSpectrum::from_eigenvalues(powerlaw_spectrum(self.dim, self.exponent, self.offset, self.total))
    }

    pub fn sample(&self, seed: u64) -> Result<(CovarianceSpectrum, DataMatrix)> {
        let s = self.spectrum()?;
        let x = sample_gaussian(&s, self.samples, seed)?;
        Ok((s, x))
    }
}

/// `h_α` at the PCA coordinates of each row.
pub fn hermite_labels(spectrum: &CovarianceSpectrum, data: &DataMatrix, alpha: &MultiIndex) -> Result<Vec<f64>> {
    let z = pca_coordinates(spectrum, data)?;
    multi_hermite(alpha, &z)
}

/// Settings for [`predict_learning_curve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictSettings {
    /// Number of Hermite eigenmodes `P`.
    pub modes: usize,
    /// Largest mode degree `L`.
    pub max_degree: usize,
    /// Level-coefficient truncation; defaults to the kernel's.
    pub truncation: Option<usize>,
    /// Number of modes used to decompose the target.
    pub target_modes: usize,
    pub method: DecompositionMethod,
    pub ridge: f64,
    pub n_grid: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PredictionReport {
    pub effective_dimension: f64,
    pub radius: f64,
    pub coefficients: LevelCoefficients,
    pub eigensystem: HermiteEigensystem,
    pub decomposition: TargetDecomposition,
    /// On-sphere `K(x,x)` from the truncated series.
    pub kernel_trace: f64,
    /// `max(0, trace - Σλ)`, added to the ridge.
    pub tail_mass: f64,
    /// Target power assigned to eigenmodes.
    pub captured_power: f64,
    /// Target power outside the eigenmodes, treated as noise.
    pub noise: f64,
    pub predictions: Vec<RiskPrediction>,
}

/// Summary written next to predicted curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionSummary {
    pub effective_dimension: f64,
    pub radius: f64,
    pub modes: usize,
    pub eigensystem_truncated: bool,
    pub coefficient_truncation: usize,
    pub kernel_trace: f64,
    pub tail_mass: f64,
    pub captured_power: f64,
    pub noise: f64,
    pub target_power: f64,
}

impl PredictionReport {
    pub fn summary(&self) -> PredictionSummary {
        PredictionSummary {
            effective_dimension: self.effective_dimension,
            radius: self.radius,
            modes: self.eigensystem.len(),
            eigensystem_truncated: self.eigensystem.truncated(),
            coefficient_truncation: self.coefficients.truncation(),
            kernel_trace: self.kernel_trace,
            tail_mass: self.tail_mass,
            captured_power: self.captured_power,
            noise: self.noise,
            target_power: self.decomposition.total_power(),
        }
    }
}

/// Predicts the KRR learning curve of `labels` on `data` from the data's
/// second-moment spectrum alone.
///
/// Stages: covariance, level coefficients, Hermite eigensystem, target
/// decomposition and the eigenframework. Errors carry the stage name.
pub fn predict_learning_curve(
    spec: &KernelSpec,
    data: &DataMatrix,
    labels: &[f64],
    settings: &PredictSettings,
    exec: Execution,
) -> Result<PredictionReport> {
    spec.validate().stage("kernel")?;
    let spectrum = estimate_covariance(data, false).stage("covariance")?;
    let truncation = settings
        .truncation
        .unwrap_or_else(|| spec.default_truncation())
        .max(settings.max_degree);
    let coefficients = level_coefficients(spec, spectrum.radius(), truncation).stage("coefficients")?;
    let hea = build_eigensystem(&spectrum, &coefficients, settings.modes, settings.max_degree).stage("eigensystem")?;
    let decomposition = decompose_from_dataset_with(
        data,
        labels,
        &spectrum,
        settings.target_modes,
        settings.max_degree,
        settings.method,
        exec,
    )
    .stage("decomposition")?;

    let mut lookup: std::collections::HashMap<&MultiIndex, f64> = std::collections::HashMap::new();
    for (m, v) in decomposition.modes.iter().zip(&decomposition.coefficients) {
        lookup.insert(m, *v);
    }
    let v: Vec<f64> = hea
        .modes()
        .iter()
        .map(|m| lookup.remove(&m.alpha).unwrap_or(0.0))
        .collect();
    let captured_power: f64 = v.iter().map(|c| c * c).sum();
    let noise = decomposition.noise_power + lookup.values().map(|c| c * c).sum::<f64>();

    let r = spectrum.radius();
    let kernel_trace = sphere_series(&coefficients, r * r);
    let gap = kernel_trace - hea.eigenvalue_sum();
    let tail_mass = if gap > 1e-12 * kernel_trace { gap } else { 0.0 };
    let task = TaskSpectrum::new(hea.eigenvalues(), v, noise, settings.ridge, tail_mass).stage("eigenframework")?;
    let predictions = learning_curve_prediction_with(&task, &settings.n_grid, exec).stage("eigenframework")?;
    Ok(PredictionReport {
        effective_dimension: spectrum.effective_dimension(),
        radius: r,
        coefficients,
        eigensystem: hea,
        decomposition,
        kernel_trace,
        tail_mass,
        captured_power,
        noise,
        predictions,
    })
}

/// A family of overlap checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sweep", rename_all = "snake_case")]
pub enum Sweep {
    /// Gaussian kernel at each width on one fixed dataset.
    GaussianWidth { sigmas: Vec<f64> },
    /// One kernel on datasets whose spectrum exponent is tuned to each
    /// effective dimension.
    EffectiveDimension { kernel: KernelSpec, targets: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSetup {
    pub data: SyntheticData,
    pub check: HeaCheckConfig,
    /// Number of populated bins averaged into the headline overlap.
    pub top_bins: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Kernel width or effective dimension.
    pub parameter: f64,
    pub effective_dimension: f64,
    pub top_bin_overlap: f64,
    pub bin_overlaps: Vec<(usize, f64)>,
}

/// Top-bin overlap at each sweep point.
///
/// For effective-dimension sweeps the configured `exponent` is replaced
/// per point; all points share the seed.
pub fn failure_sweep(sweep: &Sweep, setup: &SweepSetup, exec: Execution) -> Result<Vec<SweepPoint>> {
    let point = |parameter: f64, spec: &KernelSpec, data: &DataMatrix| -> Result<SweepPoint> {
        let report = check_hea(spec, data, &setup.check, exec)?;
        Ok(SweepPoint {
            parameter,
            effective_dimension: estimate_covariance(data, false)?.effective_dimension(),
            top_bin_overlap: report.overlap.top_bin_overlap(setup.top_bins),
            bin_overlaps: report.overlap.top_bin_overlaps(setup.top_bins),
        })
    };
    match sweep {
        Sweep::GaussianWidth { sigmas } => {
            let (_, x) = setup.data.sample(setup.seed)?;
            sigmas
                .iter()
                .map(|&sigma| point(sigma, &KernelSpec::Gaussian { sigma }, &x))
                .collect()
        }
        Sweep::EffectiveDimension { kernel, targets } => targets
            .iter()
            .map(|&target| {
                let exponent = exponent_for_effective_dimension(setup.data.dim, setup.data.offset, target)?;
                let cfg = SyntheticData {
                    exponent,
                    ..setup.data.clone()
                };
                let (_, x) = cfg.sample(setup.seed)?;
                point(target, kernel, &x)
            })
            .collect(),
    }
}
