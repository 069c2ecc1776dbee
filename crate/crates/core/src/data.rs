//! Data matrices, covariance spectra, preprocessing and synthetic data.

use faer::{Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::eigensystem::HermiteEigensystem;
use crate::error::{input, Error, Result};
use crate::hermite::{multi_hermite_into, pca_coordinates_prefix, MultiIndex};
use crate::linalg;

/// Relative threshold below which covariance eigenvalues are treated as zero.
pub const EIGENVALUE_FLOOR: f64 = 1e-14;

/// `N × d` matrix of finite samples, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    values: Mat<f64>,
}

impl DataMatrix {
    pub fn from_mat(values: Mat<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return input("data matrix must have at least one row and one column");
        }
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                if !values[(i, j)].is_finite() {
                    return input(format!("non-finite entry at ({i}, {j})"));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return input(format!("row {i} has {} entries, expected {d}", r.len()));
        }
        Self::from_mat(Mat::from_fn(n, d, |i, j| rows[i][j]))
    }

    pub fn from_row_major(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                found: values.len(),
            });
        }
        Self::from_mat(Mat::from_fn(rows, cols, |i, j| values[i * cols + j]))
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn as_ref(&self) -> MatRef<'_, f64> {
        self.values.as_ref()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.ncols()).map(|j| self.values[(i, j)]).collect()
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.nrows() * self.ncols());
        for i in 0..self.nrows() {
            for j in 0..self.ncols() {
                v.push(self.values[(i, j)]);
            }
        }
        v
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> DataMatrix {
        DataMatrix {
            values: Mat::from_fn(idx.len(), self.ncols(), |i, j| self.values[(idx[i], j)]),
        }
    }

    pub fn into_mat(self) -> Mat<f64> {
        self.values
    }
}

/// Eigendecomposition `Σ = U Γ Uᵀ` of a data covariance.
#[derive(Clone, Debug)]
pub struct CovarianceSpectrum {
    directions: Mat<f64>,
    eigenvalues: Vec<f64>,
    radius: f64,
    effective_dimension: f64,
}

impl CovarianceSpectrum {
    /// Builds from orthonormal directions (columns) and matching eigenvalues.
    ///
    /// Eigenvalues must be sorted descending; tiny and negative values are
    /// clamped to zero.
    pub fn new(directions: Mat<f64>, eigenvalues: Vec<f64>) -> Result<Self> {
        let d = eigenvalues.len();
        if d == 0 {
            return input("spectrum must have at least one eigenvalue");
        }
        if directions.nrows() != d || directions.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                found: directions.ncols(),
            });
        }
        if eigenvalues.iter().any(|g| !g.is_finite()) {
            return input("non-finite covariance eigenvalue");
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return input("covariance eigenvalues must be sorted descending");
        }
        let top = eigenvalues[0].max(0.0);
        let eigenvalues: Vec<f64> = eigenvalues
            .into_iter()
            .map(|g| if g <= EIGENVALUE_FLOOR * top { 0.0 } else { g })
            .collect();
        let sum: f64 = eigenvalues.iter().sum();
        let sum2: f64 = eigenvalues.iter().map(|g| g * g).sum();
        let effective_dimension = if sum2 > 0.0 { sum * sum / sum2 } else { 0.0 };
        Ok(Self {
            directions,
            eigenvalues,
            radius: sum.sqrt(),
            effective_dimension,
        })
    }

    /// Axis-aligned spectrum (`U = I`).
    pub fn from_eigenvalues(eigenvalues: Vec<f64>) -> Result<Self> {
        let d = eigenvalues.len();
        Self::new(Mat::identity(d, d), eigenvalues)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn directions(&self) -> MatRef<'_, f64> {
        self.directions.as_ref()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `r = (Σ γ_i)^{1/2}`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `(Σ γ_i)² / Σ γ_i²`.
    pub fn effective_dimension(&self) -> f64 {
        self.effective_dimension
    }

    /// Number of strictly positive eigenvalues.
    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|&&g| g > 0.0).count()
    }
}

/// Second-moment (or covariance, when `center`) spectrum of the rows.
pub fn estimate_covariance(data: &DataMatrix, center: bool) -> Result<CovarianceSpectrum> {
    let n = data.nrows();
    let d = data.ncols();
    if center && n < 2 {
        return input("centering needs at least two samples");
    }
    let x = data.as_ref();
    let cov = if center {
        let mean: Vec<f64> = (0..d)
            .map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64)
            .collect();
        let xc = Mat::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
        linalg::at_b(xc.as_ref(), xc.as_ref())
    } else {
        linalg::at_b(x, x)
    };
    let cov = Mat::from_fn(d, d, |i, j| 0.5 * (cov[(i, j)] + cov[(j, i)]) / n as f64);
    let (values, vectors) = linalg::sym_eigen(cov.as_ref())?;
    let values = values.into_iter().map(|v| v.max(0.0)).collect();
    CovarianceSpectrum::new(vectors, values)
}

/// Which dimension the Frobenius normalization `A ↦ A / sqrt(‖A‖²_F / m)` uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZcaNorm {
    /// `m = d`
    #[default]
    Dimension,
    /// `m = min(N, d)`
    Rank,
}

/// Preprocessing applied before estimating the spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub zca_strength: Option<f64>,
    pub zca_norm: ZcaNorm,
    pub normalize_samples: bool,
    pub center: bool,
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        match self.zca_strength {
            Some(w) if !(w.is_finite() && w >= 0.0) => {
                input(format!("ZCA strength must be finite and nonnegative, got {w}"))
            }
            _ => Ok(()),
        }
    }

    /// Applies ZCA (if set) and then sample normalization (if set).
    pub fn apply(&self, data: &DataMatrix) -> Result<DataMatrix> {
        self.validate()?;
        let mut out = match self.zca_strength {
            Some(w) => zca_whiten_with(data, w, self.zca_norm)?,
            None => data.clone(),
        };
        if self.normalize_samples {
            out = normalize_samples(&out)?;
        }
        Ok(out)
    }
}

/// Regularized ZCA whitening with the default normalization dimension.
pub fn zca_whiten(data: &DataMatrix, omega2: f64) -> Result<DataMatrix> {
    zca_whiten_with(data, omega2, ZcaNorm::Dimension)
}

/// Regularized ZCA whitening: with `X = V S Uᵀ` (rows are samples),
/// returns `V n(S (ω² n(S)² + I)^{-1/2}) Uᵀ` where `n(A) = A / sqrt(‖A‖²_F / m)`.
pub fn zca_whiten_with(data: &DataMatrix, omega2: f64, norm: ZcaNorm) -> Result<DataMatrix> {
    if !(omega2.is_finite() && omega2 >= 0.0) {
        return input(format!("ZCA strength must be finite and nonnegative, got {omega2}"));
    }
    let (n, d) = (data.nrows(), data.ncols());
    let m = match norm {
        ZcaNorm::Dimension => d,
        ZcaNorm::Rank => n.min(d),
    } as f64;
    let (v, s, u) = linalg::thin_svd(data.as_ref())?;
    let normalize = |x: &[f64]| -> Option<Vec<f64>> {
        let f: f64 = x.iter().map(|a| a * a).sum::<f64>();
        if f <= 0.0 {
            return None;
        }
        let c = (f / m).sqrt();
        Some(x.iter().map(|a| a / c).collect())
    };
    let sbar = normalize(&s).ok_or_else(|| Error::Input("cannot whiten a zero matrix".into()))?;
    let t: Vec<f64> = s
        .iter()
        .zip(&sbar)
        .map(|(si, sb)| si / (omega2 * sb * sb + 1.0).sqrt())
        .collect();
    let t = normalize(&t).ok_or_else(|| Error::Numerical("whitened spectrum vanished".into()))?;
    let k = t.len();
    let vs = Mat::from_fn(n, k, |i, j| v[(i, j)] * t[j]);
    let out = vs.as_ref() * u.as_ref().transpose();
    DataMatrix::from_mat(out)
}

/// Scales every row to unit Euclidean norm.
pub fn normalize_samples(data: &DataMatrix) -> Result<DataMatrix> {
    let x = data.as_ref();
    let mut out = data.values.clone();
    for i in 0..data.nrows() {
        let nrm = (0..data.ncols()).map(|j| x[(i, j)] * x[(i, j)]).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return Err(Error::ZeroRow { row: i });
        }
        if nrm != 1.0 {
            for j in 0..data.ncols() {
                out[(i, j)] = x[(i, j)] / nrm;
            }
        }
    }
    Ok(DataMatrix { values: out })
}

/// Deterministic RNG for `(seed, stream)`; distinct streams are independent.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `N` samples of `𝒩(0, U Γ Uᵀ)`.
pub fn sample_gaussian(spectrum: &CovarianceSpectrum, n: usize, seed: u64) -> Result<DataMatrix> {
    if n == 0 {
        return input("sample count must be positive");
    }
    let d = spectrum.dim();
    let mut rng = rng_stream(seed, 0);
    let root: Vec<f64> = spectrum.eigenvalues().iter().map(|g| g.sqrt()).collect();
    let mut g = Mat::<f64>::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            let e: f64 = StandardNormal.sample(&mut rng);
            g[(i, j)] = e * root[j];
        }
    }
    let x = g.as_ref() * spectrum.directions().transpose();
    DataMatrix::from_mat(x)
}

/// `γ_i ∝ (i + offset)^{-exponent}` for `i = 1..=d`, scaled to sum to `total`.
pub fn powerlaw_spectrum(d: usize, exponent: f64, offset: f64, total: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=d).map(|i| (i as f64 + offset).powf(-exponent)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|g| g * total / s).collect()
}

/// `(Σγ)² / Σγ²`.
pub fn effective_dimension(gamma: &[f64]) -> f64 {
    let s: f64 = gamma.iter().sum();
    let s2: f64 = gamma.iter().map(|g| g * g).sum();
    s * s / s2
}

/// Exponent `a` such that `(i + offset)^{-a}`, `i = 1..=d`, has the requested
/// effective dimension. Requires `1 < target <= d`; `target = d` gives the
/// flat spectrum `a = 0`.
pub fn exponent_for_effective_dimension(d: usize, offset: f64, target: f64) -> Result<f64> {
    if !(target > 1.0 && target <= d as f64) {
        return input(format!("effective dimension must lie in (1, {d}], got {target}"));
    }
    if target == d as f64 {
        return Ok(0.0);
    }
    let deff = |a: f64| effective_dimension(&powerlaw_spectrum(d, a, offset, 1.0));
    let (mut lo, mut hi) = (0.0, 1.0);
    while deff(hi) > target {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::Numerical("no exponent reaches the effective dimension".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if deff(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Synthetic Gaussian-process target drawn in a Hermite eigenbasis.
#[derive(Clone, Debug)]
pub struct PowerlawTarget {
    pub values: Vec<f64>,
    pub coefficients: Vec<(MultiIndex, f64)>,
    /// Standard deviation of the added white noise.
    pub noise: f64,
}

/// `y = Σ_i c_i h_i(x) + ε·noise` with `c_i ~ 𝒩(0, (i+6)^{-β})`.
///
/// Modes are taken in the eigensystem's order with the constant mode
/// skipped so the target is mean zero; `i` counts from 1 over the rest.
/// `ε` is set so that `Σ c_i² + ε² = 1`; if the drawn coefficients already
/// exceed unit power they are rescaled to it and `ε = 0`.
pub fn powerlaw_target(
    hea: &HermiteEigensystem,
    data: &DataMatrix,
    beta: f64,
    seed: u64,
) -> Result<PowerlawTarget> {
    if !(beta > 1.0) {
        return input(format!("source exponent must exceed 1, got {beta}"));
    }
    let mut rng = rng_stream(seed, 1);
    let mut coefficients = Vec::new();
    let mut i = 0usize;
    for mode in hea.modes() {
        if mode.alpha.degree() == 0 {
            continue;
        }
        i += 1;
        let z: f64 = StandardNormal.sample(&mut rng);
        let c = z * (i as f64 + 6.0).powf(-beta / 2.0);
        coefficients.push((mode.alpha.clone(), c));
    }
    let power: f64 = coefficients.iter().map(|(_, c)| c * c).sum();
    let noise = if power > 1.0 {
        let s = power.sqrt();
        coefficients.iter_mut().for_each(|(_, c)| *c /= s);
        0.0
    } else {
        (1.0 - power).sqrt()
    };
    let n = data.nrows();
    let max_dim = coefficients
        .iter()
        .filter_map(|(a, _)| a.max_dim())
        .max()
        .map_or(0, |m| m + 1);
    let mut values = vec![0.0; n];
    if max_dim > 0 {
        let z = pca_coordinates_prefix(hea.spectrum(), data, max_dim)?;
        let mut col = vec![0.0; n];
        for (a, c) in &coefficients {
            multi_hermite_into(a, z.as_ref(), &mut col);
            for (v, h) in values.iter_mut().zip(&col) {
                *v += c * h;
            }
        }
    }
    let mut noise_rng = rng_stream(seed, 2);
    for v in values.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut noise_rng);
        *v += noise * e;
    }
    Ok(PowerlawTarget {
        values,
        coefficients,
        noise,
    })
}
