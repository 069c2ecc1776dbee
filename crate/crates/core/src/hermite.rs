//! Normalized probabilist's Hermite polynomials and multi-indices.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use faer::MatRef;
use serde::{Deserialize, Serialize};

use crate::data::{CovarianceSpectrum, DataMatrix};
use crate::error::{Error, Result};

/// `h_k(x) = He_k(x) / sqrt(k!)`.
///
/// The unnormalized recurrence `He_{k+1} = x He_k - k He_{k-1}` is run
/// first and the factorial normalization applied at the end.
pub fn hermite_1d(k: usize, x: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = x;
    for j in 1..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur / factorial_sqrt(k)
}

/// `sqrt(k!)`.
pub fn factorial_sqrt(k: usize) -> f64 {
    (1..=k).map(|j| (j as f64).sqrt()).product()
}

/// `k!` as a float.
pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

/// Writes `h_0(x) .. h_kmax(x)` into `out[0..=kmax]`.
pub fn hermite_table(kmax: usize, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if kmax == 0 {
        return;
    }
    out[1] = x;
    let mut prev = 1.0;
    let mut cur = x;
    let mut norm = 1.0;
    for j in 1..kmax {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
        norm *= ((j + 1) as f64).sqrt();
        out[j + 1] = cur / norm;
    }
}

/// Sparse multi-index `α ∈ ℕ₀ᵈ`: sorted `(dimension, order)` pairs with
/// every order at least one.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "BTreeMap<usize, u32>", into = "BTreeMap<usize, u32>")]
pub struct MultiIndex {
    entries: Vec<(usize, u32)>,
}

impl MultiIndex {
    /// The empty (degree zero) multi-index.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds from arbitrary pairs; zero orders are dropped and repeated
    /// dimensions summed.
    pub fn new(pairs: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut map = BTreeMap::new();
        for (d, o) in pairs {
            *map.entry(d).or_insert(0) += o;
        }
        map.into()
    }

    /// `order · e_dim`.
    pub fn unit(dim: usize, order: u32) -> Self {
        Self::new([(dim, order)])
    }

    pub fn from_dense(orders: &[u32]) -> Self {
        Self::new(orders.iter().copied().enumerate())
    }

    pub fn to_dense(&self, d: usize) -> Vec<u32> {
        let mut v = vec![0; d];
        for &(i, o) in &self.entries {
            if i < d {
                v[i] = o;
            }
        }
        v
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    pub fn degree(&self) -> usize {
        self.entries.iter().map(|&(_, o)| o as usize).sum()
    }

    pub fn order(&self, dim: usize) -> u32 {
        self.entries
            .iter()
            .find(|&&(d, _)| d == dim)
            .map_or(0, |&(_, o)| o)
    }

    /// Largest dimension with a nonzero order.
    pub fn max_dim(&self) -> Option<usize> {
        self.entries.last().map(|&(d, _)| d)
    }

    /// `∏ γ_i^{α_i}`.
    pub fn monomial(&self, gamma: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(d, o)| gamma.get(d).copied().unwrap_or(0.0).powi(o as i32))
            .product()
    }

    /// `α!`.
    pub fn factorial(&self) -> f64 {
        self.entries.iter().map(|&(_, o)| factorial(o as usize)).product()
    }

    /// Dense lexicographic order, larger leading orders first:
    /// `2e₁ < e₁+e₂ < 2e₂` and `e₁ < e₂`.
    pub fn cmp_lex_desc(&self, other: &Self) -> Ordering {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Less,
                (None, Some(_)) => return Ordering::Greater,
                (Some(&(da, oa)), Some(&(db, ob))) => {
                    if da != db {
                        return da.cmp(&db);
                    }
                    if oa != ob {
                        return ob.cmp(&oa);
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
    }
}

impl From<BTreeMap<usize, u32>> for MultiIndex {
    fn from(map: BTreeMap<usize, u32>) -> Self {
        Self {
            entries: map.into_iter().filter(|&(_, o)| o > 0).collect(),
        }
    }
}

impl From<MultiIndex> for BTreeMap<usize, u32> {
    fn from(m: MultiIndex) -> Self {
        m.entries.into_iter().collect()
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return write!(f, "0");
        }
        for (k, &(d, o)) in self.entries.iter().enumerate() {
            if k > 0 {
                write!(f, "+")?;
            }
            if o == 1 {
                write!(f, "e{d}")?;
            } else {
                write!(f, "{o}e{d}")?;
            }
        }
        Ok(())
    }
}

/// PCA coordinates `z = Γ^{-1/2} Uᵀ x` for every row; zero-variance
/// coordinates are set to 0.
pub fn pca_coordinates(spectrum: &CovarianceSpectrum, data: &DataMatrix) -> Result<DataMatrix> {
    pca_coordinates_prefix(spectrum, data, spectrum.dim())
}

/// Like [`pca_coordinates`] but only the leading `k` principal coordinates.
pub fn pca_coordinates_prefix(
    spectrum: &CovarianceSpectrum,
    data: &DataMatrix,
    k: usize,
) -> Result<DataMatrix> {
    let d = spectrum.dim();
    if data.ncols() != d {
        return Err(Error::Dimension {
            expected: d,
            found: data.ncols(),
        });
    }
    let k = k.min(d);
    let u = spectrum.directions().subcols(0, k);
    let mut z = data.as_ref() * u;
    for j in 0..k {
        let g = spectrum.eigenvalues()[j];
        let s = if g > 0.0 { 1.0 / g.sqrt() } else { 0.0 };
        for i in 0..z.nrows() {
            z[(i, j)] *= s;
        }
    }
    DataMatrix::from_mat(z)
}

/// `h_α(z) = ∏ h_{α_i}(z_i)` for every row of `z`.
pub fn multi_hermite(alpha: &MultiIndex, z: &DataMatrix) -> Result<Vec<f64>> {
    if let Some(m) = alpha.max_dim() {
        if m >= z.ncols() {
            return Err(Error::Input(format!(
                "multi-index dimension {m} out of range for {} columns",
                z.ncols()
            )));
        }
    }
    let mut out = vec![1.0; z.nrows()];
    multi_hermite_into(alpha, z.as_ref(), &mut out);
    Ok(out)
}

/// Writes `h_α` evaluated on every row of `z` into `out`.
pub(crate) fn multi_hermite_into(alpha: &MultiIndex, z: MatRef<'_, f64>, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 1.0);
    for &(d, o) in alpha.entries() {
        for (i, v) in out.iter_mut().enumerate() {
            *v *= hermite_1d(o as usize, z[(i, d)]);
        }
    }
}
