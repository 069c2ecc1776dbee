//! The Hermite eigensystem: eigenvalues `λ_α = c_{|α|} ∏ γ_i^{α_i}` with
//! multivariate Hermite eigenfunctions in PCA coordinates.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::data::{CovarianceSpectrum, DataMatrix};
use crate::error::{input, Result};
use crate::hermite::{multi_hermite_into, pca_coordinates_prefix, MultiIndex};
use crate::kernels::LevelCoefficients;
use crate::par::Execution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub alpha: MultiIndex,
    pub degree: usize,
    pub lambda: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeOrdering {
    EigenvalueDescending,
    DegreeMajor,
}

#[derive(Clone, Debug)]
pub struct HermiteEigensystem {
    modes: Vec<Mode>,
    spectrum: CovarianceSpectrum,
    coefficients: Option<LevelCoefficients>,
    ordering: ModeOrdering,
    truncated: bool,
}

impl HermiteEigensystem {
    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn spectrum(&self) -> &CovarianceSpectrum {
        &self.spectrum
    }

    pub fn coefficients(&self) -> Option<&LevelCoefficients> {
        self.coefficients.as_ref()
    }

    pub fn ordering(&self) -> ModeOrdering {
        self.ordering
    }

    /// True when fewer modes than requested had positive eigenvalue.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    pub fn alphas(&self) -> Vec<MultiIndex> {
        self.modes.iter().map(|m| m.alpha.clone()).collect()
    }

    /// Total eigenvalue mass of the listed modes.
    pub fn eigenvalue_sum(&self) -> f64 {
        self.modes.iter().map(|m| m.lambda).sum()
    }
}

#[derive(PartialEq)]
struct Candidate {
    product: f64,
    dims: Vec<usize>,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.product
            .total_cmp(&other.product)
            .then_with(|| other.dims.cmp(&self.dims))
    }
}

/// The `count` multi-indices of degree `level` with the largest
/// `∏ γ_i^{α_i} > 0`, sorted by product descending then lexicographically.
///
/// Best-first search over nondecreasing dimension sequences; incrementing a
/// position never increases the product because `γ` is sorted descending.
pub fn top_monomials(gamma: &[f64], level: usize, count: usize) -> Vec<(MultiIndex, f64)> {
    let positive = gamma.iter().take_while(|&&g| g > 0.0).count();
    if count == 0 || positive == 0 {
        return Vec::new();
    }
    if level == 0 {
        return vec![(MultiIndex::zero(), 1.0)];
    }
    let product = |dims: &[usize]| dims.iter().map(|&d| gamma[d]).product::<f64>();
    let mut heap = BinaryHeap::new();
    let mut seen = HashSet::new();
    let start = vec![0usize; level];
    seen.insert(start.clone());
    heap.push(Candidate {
        product: product(&start),
        dims: start,
    });
    let mut out: Vec<(Vec<usize>, f64)> = Vec::new();
    while let Some(c) = heap.pop() {
        if out.len() >= count && c.product < out[count - 1].1 {
            break;
        }
        for k in 0..level {
            let next_ok = k + 1 == level || c.dims[k] < c.dims[k + 1];
            if next_ok && c.dims[k] + 1 < positive {
                let mut nd = c.dims.clone();
                nd[k] += 1;
                if seen.insert(nd.clone()) {
                    heap.push(Candidate {
                        product: product(&nd),
                        dims: nd,
                    });
                }
            }
        }
        out.push((c.dims, c.product));
    }
    let mut out: Vec<(MultiIndex, f64)> = out
        .into_iter()
        .map(|(dims, p)| (MultiIndex::new(dims.into_iter().map(|d| (d, 1))), p))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp_lex_desc(&b.0)));
    out.truncate(count);
    out
}

fn check_request(spectrum: &CovarianceSpectrum, p: usize) -> Result<()> {
    if p == 0 {
        return input("mode count must be positive");
    }
    if !(spectrum.eigenvalues()[0] > 0.0) {
        return input("top covariance eigenvalue must be positive");
    }
    Ok(())
}

/// The `p` largest `λ_α` over `|α| ≤ max_degree`, sorted descending with
/// ties broken by degree and then lexicographically.
pub fn build_eigensystem(
    spectrum: &CovarianceSpectrum,
    coeffs: &LevelCoefficients,
    p: usize,
    max_degree: usize,
) -> Result<HermiteEigensystem> {
    check_request(spectrum, p)?;
    if max_degree > coeffs.truncation() {
        return input(format!(
            "max degree {max_degree} exceeds coefficient truncation {}",
            coeffs.truncation()
        ));
    }
    let gamma = spectrum.eigenvalues();
    let mut modes = Vec::new();
    for level in 0..=max_degree {
        let c = coeffs.get(level);
        if !(c > 0.0) {
            continue;
        }
        for (alpha, prod) in top_monomials(gamma, level, p) {
            let lambda = c * prod;
            if lambda > 0.0 {
                modes.push(Mode {
                    alpha,
                    degree: level,
                    lambda,
                });
            }
        }
    }
    modes.sort_by(|a, b| {
        b.lambda
            .total_cmp(&a.lambda)
            .then(a.degree.cmp(&b.degree))
            .then_with(|| a.alpha.cmp_lex_desc(&b.alpha))
    });
    let truncated = modes.len() < p;
    modes.truncate(p);
    Ok(HermiteEigensystem {
        modes,
        spectrum: spectrum.clone(),
        coefficients: Some(coeffs.clone()),
        ordering: ModeOrdering::EigenvalueDescending,
        truncated,
    })
}

/// Kernel-independent ordering: degree ascending, then `∏ γ_i^{α_i}`
/// descending, then lexicographic. Each mode's `lambda` is the product.
pub fn degree_major(spectrum: &CovarianceSpectrum, p: usize, max_degree: usize) -> Result<HermiteEigensystem> {
    check_request(spectrum, p)?;
    let mut modes = Vec::new();
    for level in 0..=max_degree {
        let need = p - modes.len();
        if need == 0 {
            break;
        }
        for (alpha, prod) in top_monomials(spectrum.eigenvalues(), level, need) {
            modes.push(Mode {
                alpha,
                degree: level,
                lambda: prod,
            });
        }
    }
    let truncated = modes.len() < p;
    Ok(HermiteEigensystem {
        modes,
        spectrum: spectrum.clone(),
        coefficients: None,
        ordering: ModeOrdering::DegreeMajor,
        truncated,
    })
}

/// Multi-indices of [`degree_major`].
pub fn degree_major_ordering(spectrum: &CovarianceSpectrum, p: usize, max_degree: usize) -> Result<Vec<MultiIndex>> {
    Ok(degree_major(spectrum, p, max_degree)?.alphas())
}

/// `N × P` design matrix with column `p` equal to `h_{α_p}` on the samples.
pub fn evaluate_eigensystem(hea: &HermiteEigensystem, data: &DataMatrix) -> Result<Mat<f64>> {
    evaluate_modes_with(hea.spectrum(), &hea.alphas(), data, Execution::default())
}

pub fn evaluate_eigensystem_with(
    hea: &HermiteEigensystem,
    data: &DataMatrix,
    exec: Execution,
) -> Result<Mat<f64>> {
    evaluate_modes_with(hea.spectrum(), &hea.alphas(), data, exec)
}

/// Design matrix for an arbitrary list of multi-indices.
pub fn evaluate_modes_with(
    spectrum: &CovarianceSpectrum,
    alphas: &[MultiIndex],
    data: &DataMatrix,
    exec: Execution,
) -> Result<Mat<f64>> {
    let width = alphas
        .iter()
        .filter_map(|a| a.max_dim())
        .max()
        .map_or(1, |m| m + 1);
    if width > spectrum.dim() {
        return input(format!(
            "multi-index dimension {} out of range for spectrum of dimension {}",
            width - 1,
            spectrum.dim()
        ));
    }
    let z = pca_coordinates_prefix(spectrum, data, width)?;
    let n = data.nrows();
    let mut buf = vec![0.0; n * alphas.len()];
    let zr = z.as_ref();
    exec.for_each_chunk(&mut buf, n, |j, col| multi_hermite_into(&alphas[j], zr, col));
    Ok(MatRef::from_column_major_slice(&buf, n, alphas.len()).to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec2() -> CovarianceSpectrum {
        CovarianceSpectrum::from_eigenvalues(vec![0.5, 0.25]).unwrap()
    }

    #[test]
    fn small_example_with_tie() {
        let c = LevelCoefficients {
            radius: 1.0,
            values: vec![1.0, 1.0, 1.0],
        };
        let hea = build_eigensystem(&spec2(), &c, 6, 2).unwrap();
        let lam = hea.eigenvalues();
        assert_eq!(lam, vec![1.0, 0.5, 0.25, 0.25, 0.125, 0.0625]);
        let got: Vec<Vec<u32>> = hea.alphas().iter().map(|a| a.to_dense(2)).collect();
        assert_eq!(
            got,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert!(!hea.truncated());
    }

    #[test]
    fn degree_major_small() {
        let order = degree_major_ordering(&spec2(), 6, 2).unwrap();
        let got: Vec<Vec<u32>> = order.iter().map(|a| a.to_dense(2)).collect();
        assert_eq!(
            got,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
    }

    #[test]
    fn one_dimension_one_mode_per_degree() {
        let s = CovarianceSpectrum::from_eigenvalues(vec![0.3]).unwrap();
        let c = LevelCoefficients {
            radius: 1.0,
            values: vec![2.0, 1.5, 0.7, 0.2],
        };
        let hea = build_eigensystem(&s, &c, 10, 3).unwrap();
        assert_eq!(hea.len(), 4);
        assert!(hea.truncated());
        for m in hea.modes() {
            let want = c.values[m.degree] * 0.3f64.powi(m.degree as i32);
            assert!((m.lambda - want).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_variance_dimensions_are_skipped() {
        let s = CovarianceSpectrum::from_eigenvalues(vec![1.0, 0.0]).unwrap();
        let c = LevelCoefficients {
            radius: 1.0,
            values: vec![1.0, 0.5],
        };
        let hea = build_eigensystem(&s, &c, 5, 1).unwrap();
        assert_eq!(hea.len(), 2);
    }

    #[test]
    fn rejects_degree_above_truncation() {
        let c = LevelCoefficients {
            radius: 1.0,
            values: vec![1.0, 1.0],
        };
        assert!(build_eigensystem(&spec2(), &c, 3, 2).is_err());
        assert!(build_eigensystem(&spec2(), &c, 0, 1).is_err());
    }

    #[test]
    fn constant_column_first() {
        let x = DataMatrix::from_rows(&[vec![0.3, -0.1], vec![1.0, 2.0]]).unwrap();
        let h = evaluate_eigensystem(&degree_major(&spec2(), 4, 2).unwrap(), &x).unwrap();
        assert_eq!(h.ncols(), 4);
        assert_eq!((h[(0, 0)], h[(1, 0)]), (1.0, 1.0));
        assert!((h[(0, 1)] - 0.3 / 0.5f64.sqrt()).abs() < 1e-15);
    }
}
