//! Empirical kernel diagonalization and comparison with the Hermite
//! eigensystem through log-spaced spectral bins and subspace overlaps.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::data::{estimate_covariance, DataMatrix};
use crate::eigensystem::{build_eigensystem, evaluate_eigensystem_with, HermiteEigensystem};
use crate::error::{input, Error, Result};
use crate::kernels::{kernel_matrix_sym_with, level_coefficients, KernelSpec};
use crate::linalg::{frob2, sym_eigen, thin_q};
use crate::par::Execution;

/// Relative size below which empirical eigenvalues count as numerical zeros.
pub const NUMERICAL_ZERO: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct EmpiricalEigensystem {
    /// Top eigenvalues of `K/N`, descending; round-off negatives clamped to 0.
    pub eigenvalues: Vec<f64>,
    /// `N × k`; column `i` is `sqrt(N) u_i`.
    pub eigenfunctions: Mat<f64>,
    pub sample_count: usize,
}

/// Top `k` eigenpairs of `K_XX / N`.
pub fn empirical_eigensystem(spec: &KernelSpec, data: &DataMatrix, k: usize) -> Result<EmpiricalEigensystem> {
    empirical_eigensystem_with(spec, data, k, Execution::default())
}

pub fn empirical_eigensystem_with(
    spec: &KernelSpec,
    data: &DataMatrix,
    k: usize,
    exec: Execution,
) -> Result<EmpiricalEigensystem> {
    spec.validate()?;
    let n = data.nrows();
    if k == 0 || k > n {
        return input(format!("requested {k} modes from {n} samples"));
    }
    let mut kmat = kernel_matrix_sym_with(spec, data, exec);
    let inv_n = 1.0 / n as f64;
    for j in 0..n {
        for i in 0..n {
            kmat[(i, j)] *= inv_n;
        }
    }
    let (values, vectors) = sym_eigen(kmat.as_ref())?;
    let scale = (n as f64).sqrt();
    let eigenvalues = values[..k].iter().map(|v| v.max(0.0)).collect();
    let eigenfunctions = Mat::from_fn(n, k, |i, j| vectors[(i, j)] * scale);
    Ok(EmpiricalEigensystem {
        eigenvalues,
        eigenfunctions,
        sample_count: n,
    })
}

/// Shared log-spaced bins for two spectra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralBins {
    pub bins_per_decade: usize,
    /// Upper edge of bin 0; bin `b` covers `[top·10^{-(b+1)/k}, top·10^{-b/k})`.
    pub top: f64,
    pub count: usize,
    pub theory: Vec<Option<usize>>,
    pub empirical: Vec<Option<usize>>,
    /// Modes left out of binning as zero or negative.
    pub excluded_theory: usize,
    pub excluded_empirical: usize,
    /// Leading bins lying wholly above the smallest retained eigenvalue of
    /// both spectra; later bins may be cut off by the mode counts.
    pub resolved: usize,
}

impl SpectralBins {
    /// `count + 1` edges, descending.
    pub fn edges(&self) -> Vec<f64> {
        (0..=self.count)
            .map(|b| self.top * 10f64.powf(-(b as f64) / self.bins_per_decade as f64))
            .collect()
    }
}

/// Assigns both spectra to bins anchored on the decade grid just above the
/// largest eigenvalue.
pub fn spectral_bins(theory: &[f64], empirical: &[f64], bins_per_decade: usize) -> Result<SpectralBins> {
    bins_impl(theory, empirical, bins_per_decade, false)
}

/// `theory_complete` marks a theory spectrum that lists every positive
/// eigenvalue, so it cuts off no bins.
fn bins_impl(theory: &[f64], empirical: &[f64], bins_per_decade: usize, theory_complete: bool) -> Result<SpectralBins> {
    if bins_per_decade == 0 {
        return input("bins per decade must be positive");
    }
    let max = theory
        .iter()
        .chain(empirical)
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    if !(max > 0.0) {
        return input("spectra contain no positive eigenvalues");
    }
    let k = bins_per_decade as f64;
    let top = 10f64.powf((k * max.log10()).ceil() / k);
    let floor = NUMERICAL_ZERO * max;
    let assign = |v: &[f64]| -> (Vec<Option<usize>>, usize) {
        let bins: Vec<Option<usize>> = v
            .iter()
            .map(|&l| (l > floor).then(|| (k * (top / l).log10() + 1e-9).floor().max(0.0) as usize))
            .collect();
        let excluded = bins.iter().filter(|b| b.is_none()).count();
        (bins, excluded)
    };
    let (th, ex_th) = assign(theory);
    let (em, ex_em) = assign(empirical);
    let count = th.iter().chain(&em).flatten().max().map_or(0, |m| m + 1);
    // A spectrum with excluded zeros was kept in full.
    let retained_min = |v: &[f64], excluded: usize| {
        if excluded > 0 {
            0.0
        } else {
            v.iter().copied().fold(f64::INFINITY, f64::min)
        }
    };
    let theory_min = if theory_complete { 0.0 } else { retained_min(theory, ex_th) };
    let cut = theory_min.max(retained_min(empirical, ex_em));
    let resolved = (0..count)
        .take_while(|&b| top * 10f64.powf(-((b + 1) as f64) / k) > cut)
        .count();
    Ok(SpectralBins {
        bins_per_decade,
        top,
        count,
        theory: th,
        empirical: em,
        excluded_theory: ex_th,
        excluded_empirical: ex_em,
        resolved,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub edges: Vec<f64>,
    pub dim_theory: Vec<usize>,
    pub dim_empirical: Vec<usize>,
    /// `overlap[i][j]`, `None` when either bin is empty.
    pub overlap: Vec<Vec<Option<f64>>>,
    /// See [`SpectralBins::resolved`].
    pub resolved_bins: usize,
}

impl OverlapReport {
    /// Resolved bins holding modes of both spectra, in decreasing
    /// eigenvalue order.
    pub fn populated_bins(&self) -> Vec<usize> {
        (0..self.resolved_bins.min(self.dim_theory.len()))
            .filter(|&b| self.dim_theory[b] > 0 && self.dim_empirical[b] > 0)
            .collect()
    }

    /// Diagonal overlaps of the first `k` populated bins.
    pub fn top_bin_overlaps(&self, k: usize) -> Vec<(usize, f64)> {
        self.populated_bins()
            .into_iter()
            .take(k)
            .filter_map(|b| self.overlap[b][b].map(|o| (b, o)))
            .collect()
    }

    /// Mean of [`Self::top_bin_overlaps`].
    pub fn top_bin_overlap(&self, k: usize) -> f64 {
        let v = self.top_bin_overlaps(k);
        if v.is_empty() {
            return f64::NAN;
        }
        v.iter().map(|(_, o)| o).sum::<f64>() / v.len() as f64
    }
}

fn bin_basis(phi: MatRef<'_, f64>, assign: &[Option<usize>], bin: usize) -> Option<Mat<f64>> {
    let cols: Vec<usize> = (0..assign.len()).filter(|&c| assign[c] == Some(bin)).collect();
    if cols.is_empty() {
        return None;
    }
    let sub = Mat::from_fn(phi.nrows(), cols.len(), |i, j| phi[(i, cols[j])]);
    Some(thin_q(sub.as_ref()))
}

/// `Overlap(i, j) = ‖Φ_iᵀ Ψ_j‖²_F / d_j` between the theory subspace of bin
/// `i` and the empirical subspace of bin `j`; both are re-orthonormalized
/// within each bin first.
pub fn subspace_overlap(
    theory: MatRef<'_, f64>,
    empirical: MatRef<'_, f64>,
    bins: &SpectralBins,
) -> Result<OverlapReport> {
    if theory.ncols() != bins.theory.len() || empirical.ncols() != bins.empirical.len() {
        return input("column counts do not match the bin assignment");
    }
    if theory.nrows() != empirical.nrows() {
        return Err(Error::Dimension {
            expected: theory.nrows(),
            found: empirical.nrows(),
        });
    }
    let nb = bins.count;
    let th: Vec<Option<Mat<f64>>> = (0..nb).map(|b| bin_basis(theory, &bins.theory, b)).collect();
    let em: Vec<Option<Mat<f64>>> = (0..nb).map(|b| bin_basis(empirical, &bins.empirical, b)).collect();
    let dim = |a: &[Option<usize>], b: usize| a.iter().filter(|&&x| x == Some(b)).count();
    let overlap = (0..nb)
        .map(|i| {
            (0..nb)
                .map(|j| match (&th[i], &em[j]) {
                    (Some(p), Some(q)) => {
                        let m = p.as_ref().transpose() * q.as_ref();
                        Some(frob2(m.as_ref()) / q.ncols() as f64)
                    }
                    _ => None,
                })
                .collect()
        })
        .collect();
    Ok(OverlapReport {
        edges: bins.edges(),
        dim_theory: (0..nb).map(|b| dim(&bins.theory, b)).collect(),
        dim_empirical: (0..nb).map(|b| dim(&bins.empirical, b)).collect(),
        overlap,
        resolved_bins: bins.resolved,
    })
}

/// Settings for [`check_hea`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeaCheckConfig {
    /// Number of Hermite modes.
    pub modes: usize,
    pub max_degree: usize,
    /// Level-coefficient truncation; at least `max_degree`.
    pub truncation: usize,
    /// Number of empirical modes.
    pub empirical_modes: usize,
    pub bins_per_decade: usize,
}

/// One row of the eigenvalue scatter: shared rank, both eigenvalues and
/// the Hermite mode's degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub rank: usize,
    pub lambda_empirical: f64,
    pub lambda_theory: f64,
    pub degree: usize,
}

#[derive(Clone, Debug)]
pub struct HeaCheckReport {
    pub eigensystem: HermiteEigensystem,
    pub empirical: EmpiricalEigensystem,
    pub scatter: Vec<ScatterRow>,
    pub bins: SpectralBins,
    pub overlap: OverlapReport,
}

/// Diagonalizes the kernel on `data` and compares it with the Hermite
/// eigensystem built from the data's second-moment spectrum.
pub fn check_hea(spec: &KernelSpec, data: &DataMatrix, cfg: &HeaCheckConfig, exec: Execution) -> Result<HeaCheckReport> {
    let spectrum = estimate_covariance(data, false)?;
    let coeffs = level_coefficients(spec, spectrum.radius(), cfg.truncation.max(cfg.max_degree))?;
    let hea = build_eigensystem(&spectrum, &coeffs, cfg.modes, cfg.max_degree)?;
    let emp = empirical_eigensystem_with(spec, data, cfg.empirical_modes.min(data.nrows()), exec)?;
    let phi = evaluate_eigensystem_with(&hea, data, exec)?;
    let th = hea.eigenvalues();
    let scatter = th
        .iter()
        .zip(&emp.eigenvalues)
        .zip(hea.modes())
        .enumerate()
        .map(|(rank, ((&t, &e), m))| ScatterRow {
            rank,
            lambda_empirical: e,
            lambda_theory: t,
            degree: m.degree,
        })
        .collect();
    // A finite dot-product series whose every positive mode fits in the
    // eigensystem leaves nothing below the last theory eigenvalue.
    let complete = hea.truncated()
        && matches!(spec, KernelSpec::DotProduct { coefficients } if coefficients.len() <= cfg.max_degree + 1);
    let bins = bins_impl(&th, &emp.eigenvalues, cfg.bins_per_decade, complete)?;
    let overlap = subspace_overlap(phi.as_ref(), emp.eigenfunctions.as_ref(), &bins)?;
    Ok(HeaCheckReport {
        eigensystem: hea,
        empirical: emp,
        scatter,
        bins,
        overlap,
    })
}
