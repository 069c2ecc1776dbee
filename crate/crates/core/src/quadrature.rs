//! Gauss–Hermite quadrature for the standard normal measure.

use faer::Mat;

use crate::error::Result;
use crate::linalg::sym_eigen;

/// Nodes and weights with `Σ w_i f(x_i) ≈ E_{x~𝒩(0,1)}[f(x)]`, from the
/// eigendecomposition of the Jacobi matrix of the probabilist's Hermite
/// recurrence (off-diagonal entries `sqrt(k)`).
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let j = Mat::from_fn(n, n, |a, b| {
        if a + 1 == b || b + 1 == a {
            (a.max(b) as f64).sqrt()
        } else {
            0.0
        }
    });
    let (values, vectors) = sym_eigen(j.as_ref())?;
    let mut pairs: Vec<(f64, f64)> = (0..n).map(|k| (values[k], vectors[(0, k)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrize to remove round-off asymmetry of the computed rule.
    let m = pairs.len();
    let nodes = (0..m).map(|k| 0.5 * (pairs[k].0 - pairs[m - 1 - k].0)).collect();
    let weights = (0..m).map(|k| 0.5 * (pairs[k].1 + pairs[m - 1 - k].1)).collect();
    Ok((nodes, weights))
}
