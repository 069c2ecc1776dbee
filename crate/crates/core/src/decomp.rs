//! Recovery of target eigencoefficients from samples.
//!
//! Both methods report coefficients in per-sample units: `v̂_p²` is the
//! fraction of `‖y‖²/N` carried by mode `p`, and the noise power is what
//! remains.

use faer::MatRef;
use serde::{Deserialize, Serialize};

use crate::data::{CovarianceSpectrum, DataMatrix};
use crate::eigensystem::{degree_major_ordering, evaluate_modes_with};
use crate::error::{input, Error, Result};
use crate::hermite::MultiIndex;
use crate::linalg::dot;
use crate::par::Execution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionMethod {
    Grf,
    #[default]
    GramSchmidt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetDecomposition {
    /// Mode labels, empty when decomposing against a bare design matrix.
    pub modes: Vec<MultiIndex>,
    pub coefficients: Vec<f64>,
    pub noise_power: f64,
    pub method: DecompositionMethod,
    pub sample_count: usize,
}

impl TargetDecomposition {
    /// `Σ v̂² + ε̂²`.
    pub fn total_power(&self) -> f64 {
        self.coefficients.iter().map(|v| v * v).sum::<f64>() + self.noise_power
    }

    /// Coefficient recovered for `alpha`, if it was among the modes.
    pub fn coefficient(&self, alpha: &MultiIndex) -> Option<f64> {
        self.modes
            .iter()
            .position(|m| m == alpha)
            .map(|i| self.coefficients[i])
    }
}

fn mode_name(modes: &[MultiIndex], p: usize) -> String {
    modes.get(p).map_or_else(|| format!("column {p}"), |m| m.to_string())
}

fn check_shapes(y: &[f64], h: MatRef<'_, f64>) -> Result<()> {
    if y.len() != h.nrows() {
        return Err(Error::Dimension {
            expected: h.nrows(),
            found: y.len(),
        });
    }
    if y.is_empty() {
        return input("target must have at least one sample");
    }
    Ok(())
}

/// Greedy residual fitting: project the running residual onto each column
/// in order, `v̂_p = ⟨h_p, r⟩ / ‖h_p‖²`, `r ← r - v̂_p h_p`.
///
/// Coefficients are reported as `N^{-1/2} ‖h_p‖ v̂_p` and the noise power as
/// `‖r‖² / N`, so the powers add up to `‖y‖² / N` for any design.
pub fn grf(y: &[f64], h: MatRef<'_, f64>) -> Result<TargetDecomposition> {
    grf_labeled(y, h, &[])
}

pub(crate) fn grf_labeled(y: &[f64], h: MatRef<'_, f64>, modes: &[MultiIndex]) -> Result<TargetDecomposition> {
    check_shapes(y, h)?;
    let n = y.len();
    let sqrt_n = (n as f64).sqrt();
    let mut r = y.to_vec();
    let mut coefficients = Vec::with_capacity(h.ncols());
    for p in 0..h.ncols() {
        let col: Vec<f64> = h.col(p).iter().copied().collect();
        let nrm2 = dot(&col, &col);
        if nrm2 == 0.0 {
            return Err(Error::ZeroColumn {
                mode: mode_name(modes, p),
            });
        }
        let v = dot(&col, &r) / nrm2;
        for (ri, hi) in r.iter_mut().zip(&col) {
            *ri -= v * hi;
        }
        coefficients.push(nrm2.sqrt() * v / sqrt_n);
    }
    Ok(TargetDecomposition {
        modes: modes.to_vec(),
        coefficients,
        noise_power: dot(&r, &r) / n as f64,
        method: DecompositionMethod::Grf,
        sample_count: n,
    })
}

/// Orthonormalizes the columns in order (modified Gram–Schmidt with one
/// reorthogonalization pass) and reports `v̂_p = ⟨q_p, y⟩ / sqrt(N)` and
/// `ε̂² = ‖y‖²/N - Σ v̂_p²`.
pub fn gram_schmidt_decompose(y: &[f64], h: MatRef<'_, f64>) -> Result<TargetDecomposition> {
    gram_schmidt_labeled(y, h, &[])
}

pub(crate) fn gram_schmidt_labeled(
    y: &[f64],
    h: MatRef<'_, f64>,
    modes: &[MultiIndex],
) -> Result<TargetDecomposition> {
    check_shapes(y, h)?;
    let n = y.len();
    let p_count = h.ncols();
    if p_count > n {
        return Err(Error::RankDeficient {
            mode: mode_name(modes, n),
        });
    }
    let q = orthonormal_columns(h, modes)?;
    let sqrt_n = (n as f64).sqrt();
    let coefficients: Vec<f64> = q.iter().map(|qp| dot(qp, y) / sqrt_n).collect();
    let power = dot(y, y) / n as f64;
    let noise_power = power - coefficients.iter().map(|v| v * v).sum::<f64>();
    Ok(TargetDecomposition {
        modes: modes.to_vec(),
        coefficients,
        noise_power: noise_power.max(0.0),
        method: DecompositionMethod::GramSchmidt,
        sample_count: n,
    })
}

/// Unit-norm orthogonalized columns of `h`, in order.
pub fn orthonormal_columns(h: MatRef<'_, f64>, modes: &[MultiIndex]) -> Result<Vec<Vec<f64>>> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(h.ncols());
    for p in 0..h.ncols() {
        let mut w: Vec<f64> = h.col(p).iter().copied().collect();
        let original = dot(&w, &w).sqrt();
        for _ in 0..2 {
            for qj in &q {
                let c = dot(qj, &w);
                for (wi, qi) in w.iter_mut().zip(qj) {
                    *wi -= c * qi;
                }
            }
        }
        let nrm = dot(&w, &w).sqrt();
        if !(nrm > 1e-10 * original) {
            return Err(Error::RankDeficient {
                mode: mode_name(modes, p),
            });
        }
        w.iter_mut().for_each(|v| *v /= nrm);
        q.push(w);
    }
    Ok(q)
}

/// Decomposes `labels` in the degree-major Hermite basis of `spectrum`.
pub fn decompose_from_dataset(
    data: &DataMatrix,
    labels: &[f64],
    spectrum: &CovarianceSpectrum,
    p: usize,
    max_degree: usize,
    method: DecompositionMethod,
) -> Result<TargetDecomposition> {
    decompose_from_dataset_with(data, labels, spectrum, p, max_degree, method, Execution::default())
}

pub fn decompose_from_dataset_with(
    data: &DataMatrix,
    labels: &[f64],
    spectrum: &CovarianceSpectrum,
    p: usize,
    max_degree: usize,
    method: DecompositionMethod,
    exec: Execution,
) -> Result<TargetDecomposition> {
    if labels.len() != data.nrows() {
        return Err(Error::Dimension {
            expected: data.nrows(),
            found: labels.len(),
        });
    }
    if p > data.nrows() {
        return input(format!("mode count {p} exceeds sample count {}", data.nrows()));
    }
    let modes = degree_major_ordering(spectrum, p, max_degree)?;
    let h = evaluate_modes_with(spectrum, &modes, data, exec)?;
    match method {
        DecompositionMethod::Grf => grf_labeled(labels, h.as_ref(), &modes),
        DecompositionMethod::GramSchmidt => gram_schmidt_labeled(labels, h.as_ref(), &modes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::Mat;

    #[test]
    fn orthogonal_design_single_mode() {
        // Columns of norm sqrt(N) = 2.
        let h = Mat::from_fn(4, 2, |i, j| if j == 0 { 1.0 } else if i < 2 { 1.0 } else { -1.0 });
        let y: Vec<f64> = (0..4).map(|i| 3.0 * h[(i, 0)]).collect();
        for d in [grf(&y, h.as_ref()).unwrap(), gram_schmidt_decompose(&y, h.as_ref()).unwrap()] {
            assert!((d.coefficients[0] - 3.0).abs() < 1e-14);
            assert!(d.coefficients[1].abs() < 1e-14);
            assert!(d.noise_power.abs() < 1e-14);
        }
    }

    #[test]
    fn zero_and_dependent_columns() {
        let h = Mat::from_fn(3, 2, |i, j| if j == 0 { 1.0 + i as f64 } else { 0.0 });
        assert!(matches!(grf(&[1.0, 2.0, 3.0], h.as_ref()), Err(Error::ZeroColumn { .. })));
        let h = Mat::from_fn(3, 2, |i, _| 1.0 + i as f64);
        assert!(matches!(
            gram_schmidt_decompose(&[1.0, 2.0, 3.0], h.as_ref()),
            Err(Error::RankDeficient { .. })
        ));
        assert!(grf(&[1.0], h.as_ref()).is_err());
    }
}
