//! Exact eigensystems used as ground truth for the Hermite eigensystem.
//!
//! The Gaussian kernel on a Gaussian measure diagonalizes exactly through
//! the Mehler formula: per principal direction the eigenvalues are
//! `(1 - e^{-t}) e^{-n t}` and the eigenfunctions are squeezed Hermite
//! polynomials. The exponential kernel factorizes the same way. For finite
//! dot-product kernels the operator is diagonalized exactly in the Hermite
//! basis using the monomial-to-Hermite change of basis.

use serde::{Deserialize, Serialize};

use crate::data::{CovarianceSpectrum, DataMatrix};
use crate::error::{input, Result};
use crate::hermite::{factorial, hermite_1d, pca_coordinates, MultiIndex};
use crate::par::Execution;
use crate::quadrature::gauss_hermite;

/// Per-direction Mehler parameters of `exp(-‖x-x'‖²/2σ²)` under `𝒩(0, Σ)`.
#[derive(Clone, Debug)]
pub struct MehlerEigensystem {
    pub sigma: f64,
    pub gamma: Vec<f64>,
    /// `t_i = 2 arsinh(σ / 2 sqrt(γ_i))`, infinite for `γ_i = 0`.
    pub t: Vec<f64>,
    /// `τ_i = ¼ ln(1 + 4 γ_i / σ²)`.
    pub tau: Vec<f64>,
}

/// `(t_i, τ_i)` for each direction.
pub fn mehler_parameters(sigma: f64, gamma: &[f64]) -> Result<MehlerEigensystem> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return input(format!("kernel width must be positive, got {sigma}"));
    }
    if gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return input("variances must be finite and nonnegative");
    }
    let t = gamma
        .iter()
        .map(|&g| if g > 0.0 { 2.0 * (sigma / (2.0 * g.sqrt())).asinh() } else { f64::INFINITY })
        .collect();
    let tau = gamma
        .iter()
        .map(|&g| 0.25 * (4.0 * g / (sigma * sigma)).ln_1p())
        .collect();
    Ok(MehlerEigensystem {
        sigma,
        gamma: gamma.to_vec(),
        t,
        tau,
    })
}

impl MehlerEigensystem {
    /// `∏_i (1 - e^{-t_i}) e^{-α_i t_i}`.
    pub fn eigenvalue(&self, alpha: &MultiIndex) -> f64 {
        let mut v = 1.0;
        for (i, &t) in self.t.iter().enumerate() {
            let a = alpha.order(i);
            if t.is_infinite() {
                if a > 0 {
                    return 0.0;
                }
                continue;
            }
            v *= -(-t).exp_m1() * (-(a as f64) * t).exp();
        }
        if alpha.max_dim().is_some_and(|m| m >= self.t.len()) {
            return 0.0;
        }
        v
    }

    /// `∏_i e^{τ_i/2} exp(-(e^{2τ_i}-1) z_i²/4) h_{α_i}(e^{τ_i} z_i)` at the
    /// PCA coordinates of each row.
    pub fn eigenfunction(&self, alpha: &MultiIndex, spectrum: &CovarianceSpectrum, data: &DataMatrix) -> Result<Vec<f64>> {
        if spectrum.dim() != self.tau.len() {
            return input("spectrum dimension does not match the Mehler parameters");
        }
        let z = pca_coordinates(spectrum, data)?;
        let z = z.as_ref();
        let mut out = vec![1.0; data.nrows()];
        for (i, &tau) in self.tau.iter().enumerate() {
            if self.gamma[i] == 0.0 {
                continue;
            }
            let a = alpha.order(i) as usize;
            let e = tau.exp();
            let squeeze = (2.0 * tau).exp_m1() / 4.0;
            for (r, v) in out.iter_mut().enumerate() {
                let x = z[(r, i)];
                *v *= (0.5 * tau).exp() * (-squeeze * x * x).exp() * hermite_1d(a, e * x);
            }
        }
        Ok(out)
    }
}

/// Hermite eigenvalue of the Gaussian kernel, `e^{-r²/σ²} σ^{-2|α|} ∏ γ_i^{α_i}`
/// with `r² = Σ γ_i`.
pub fn gaussian_hea_eigenvalue(sigma: f64, gamma: &[f64], alpha: &MultiIndex) -> f64 {
    let r2: f64 = gamma.iter().sum();
    let s2 = sigma * sigma;
    (-r2 / s2).exp() * s2.powi(-(alpha.degree() as i32)) * alpha.monomial(gamma)
}

/// Exact eigenvalue of `exp(x·x'/σ²)` under `𝒩(0, diag γ)`:
/// `∏_i (1 - 2/s_i)^{-1/2} (1 - e^{-t_i}) e^{-α_i t_i}` with `s_i = σ²/γ_i`
/// and `t_i = arcosh(s_i / 2)`. Requires `σ² > 2 γ_i`.
pub fn exponential_exact_eigenvalue(sigma: f64, gamma: &[f64], alpha: &MultiIndex) -> Result<f64> {
    let s2 = sigma * sigma;
    let mut v = 1.0;
    for (i, &g) in gamma.iter().enumerate() {
        let a = alpha.order(i) as f64;
        if g == 0.0 {
            if a > 0.0 {
                return Ok(0.0);
            }
            continue;
        }
        let s = s2 / g;
        if !(s > 2.0) {
            return input(format!("exponential kernel needs σ² > 2γ, got σ² = {s2}, γ = {g}"));
        }
        let t = (s / 2.0).acosh();
        v *= (1.0 - 2.0 / s).powf(-0.5) * -(-t).exp_m1() * (-a * t).exp();
    }
    Ok(v)
}

/// `τ = ¼ ln(1 - 4/s²)` for the exponential kernel with `s = σ²/γ`.
pub fn exponential_tau(sigma: f64, gamma: f64) -> f64 {
    let s = sigma * sigma / gamma;
    0.25 * (-4.0 / (s * s)).ln_1p()
}

/// `⟨h_n | T_τ h_n⟩` under the standard normal measure, by quadrature.
pub fn squeeze_overlap(n: usize, tau: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let e = tau.exp();
    let squeeze = (2.0 * tau).exp_m1() / 4.0;
    nodes
        .iter()
        .zip(weights)
        .map(|(&x, &w)| {
            w * hermite_1d(n, x) * (0.5 * tau).exp() * (-squeeze * x * x).exp() * hermite_1d(n, e * x)
        })
        .sum()
}

/// All dense multi-indices over `d` dimensions with degree at most `max_degree`,
/// by degree and then lexicographically.
pub fn dense_basis(d: usize, max_degree: usize) -> Vec<Vec<u32>> {
    fn rec(d: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == d - 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k);
            rec(d, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for deg in 0..=max_degree as u32 {
        rec(d, deg, &mut Vec::new(), &mut out);
    }
    out
}

/// Coefficient of `h_k` in `z^n`: `n! / (2^j j! sqrt(k!))` for `n - k = 2j ≥ 0`.
pub fn monomial_to_hermite(n: usize, k: usize) -> f64 {
    if k > n || (n - k) % 2 == 1 {
        return 0.0;
    }
    let j = (n - k) / 2;
    factorial(n) / (2f64.powi(j as i32) * factorial(j) * factorial(k).sqrt())
}

/// Eigenpairs of `WWᵀ` from one-sided Jacobi on the columns of `w`
/// (stored column-major as `cols[j]`). Returns `(σ_j², unit column_j)`.
///
/// Converges to high relative accuracy when `w` is a well-conditioned
/// matrix with graded column scaling.
pub fn one_sided_jacobi(mut cols: Vec<Vec<f64>>) -> Vec<(f64, Vec<f64>)> {
    let m = cols.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let a = dot(&cols[p], &cols[p]);
                let b = dot(&cols[q], &cols[q]);
                let c = dot(&cols[p], &cols[q]);
                if c == 0.0 || c.abs() <= 1e-15 * (a * b).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * c);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                let (left, right) = cols.split_at_mut(q);
                let (cp, cq) = (&mut left[p], &mut right[0]);
                for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                    let (u, v) = (*x, *y);
                    *x = cs * u - sn * v;
                    *y = sn * u + cs * v;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut out: Vec<(f64, Vec<f64>)> = cols
        .into_iter()
        .map(|c| {
            let s2 = dot(&c, &c);
            let nrm = s2.sqrt();
            let v = if nrm > 0.0 { c.iter().map(|x| x / nrm).collect() } else { c };
            (s2, v)
        })
        .collect();
    out.sort_by(|a, b| b.0.total_cmp(&a.0));
    out
}

/// Errors of the Hermite eigensystem against an exact reference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub epsilon: f64,
    pub max_eigenvalue_rel_error: f64,
    pub max_principal_angle: f64,
}

/// Exact diagonalization of `K(x,x') = Σ_ℓ c_ℓ (x·x')^ℓ / ℓ!` under
/// `𝒩(0, diag γ)`, compared with `λ_α = c_{|α|} ∏ γ^α` and `φ_α = h_α`.
///
/// In the orthonormal Hermite basis the operator is `WWᵀ` with
/// `W[α, β] = sqrt(c_{|β|}/β!) ∏_i γ_i^{β_i/2} M[β_i, α_i]`, where `M` maps
/// monomials to Hermite polynomials. Eigenvalues are paired by rank;
/// each Hermite basis vector is paired with the exact eigenvector it
/// overlaps most, and the angle is reported in radians.
pub fn dpk_convergence_probe(gamma: &[f64], coefficients: &[f64]) -> Result<ProbeResult> {
    let d = gamma.len();
    if d == 0 || d > 6 {
        return input("probe supports 1 to 6 dimensions");
    }
    if coefficients.is_empty() || coefficients.len() > 6 {
        return input("probe supports truncation degrees 0 to 5");
    }
    if gamma.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return input("probe variances must be positive");
    }
    let max_degree = coefficients.len() - 1;
    let basis = dense_basis(d, max_degree);
    let degree = |a: &[u32]| a.iter().sum::<u32>() as usize;
    let cols: Vec<Vec<f64>> = basis
        .iter()
        .map(|beta| {
            let c = coefficients[degree(beta)];
            let bfact: f64 = beta.iter().map(|&b| factorial(b as usize)).product();
            let scale = (c / bfact).sqrt()
                * beta.iter().zip(gamma).map(|(&b, g)| g.powf(b as f64 / 2.0)).product::<f64>();
            basis
                .iter()
                .map(|alpha| {
                    scale
                        * alpha
                            .iter()
                            .zip(beta)
                            .map(|(&a, &b)| monomial_to_hermite(b as usize, a as usize))
                            .product::<f64>()
                })
                .collect()
        })
        .collect();
    let exact = one_sided_jacobi(cols);
    let hea: Vec<f64> = basis
        .iter()
        .map(|a| coefficients[degree(a)] * a.iter().zip(gamma).map(|(&k, g)| g.powi(k as i32)).product::<f64>())
        .collect();
    let mut sorted: Vec<f64> = hea.iter().copied().filter(|&l| l > 0.0).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let max_err = sorted
        .iter()
        .zip(&exact)
        .map(|(h, (e, _))| (e - h).abs() / h)
        .fold(0.0, f64::max);
    let mut max_angle: f64 = 0.0;
    for (k, &l) in hea.iter().enumerate() {
        if l <= 0.0 {
            continue;
        }
        let best = exact
            .iter()
            .filter(|(s, _)| *s > 0.0)
            .max_by(|a, b| a.1[k].abs().total_cmp(&b.1[k].abs()))
            .expect("nonempty");
        let off: f64 = best
            .1
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, v)| v * v)
            .sum();
        max_angle = max_angle.max(off.sqrt().atan2(best.1[k].abs()));
    }
    Ok(ProbeResult {
        epsilon: f64::NAN,
        max_eigenvalue_rel_error: max_err,
        max_principal_angle: max_angle,
    })
}

/// Kernel families for [`rate_probe`]; both have `c_{ℓ+1} = ε c_ℓ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProbeFamily {
    /// Finite dot-product kernel `c_ℓ = ε^ℓ` for `ℓ ≤ truncation`, diagonalized exactly.
    Geometric { truncation: usize },
    /// Exponential kernel `exp(ε x·x')` against its closed-form eigensystem,
    /// over modes of degree at most `max_degree`.
    Exponential { max_degree: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rows: Vec<ProbeResult>,
    /// Least-squares slope of `log error` against `log ε`.
    pub eigenvalue_slope: f64,
    pub angle_slope: f64,
}

/// Least-squares slope of `log y` against `log x` over positive pairs.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let k = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn exponential_probe(gamma: &[f64], eps: f64, max_degree: usize, quad: &(Vec<f64>, Vec<f64>)) -> Result<ProbeResult> {
    let sigma = eps.powf(-0.5);
    let mut max_err: f64 = 0.0;
    let mut max_angle: f64 = 0.0;
    for a in dense_basis(gamma.len(), max_degree) {
        let alpha = MultiIndex::from_dense(&a);
        let hea = eps.powi(alpha.degree() as i32) * alpha.monomial(gamma);
        let exact = exponential_exact_eigenvalue(sigma, gamma, &alpha)?;
        max_err = max_err.max((exact - hea).abs() / hea);
        let cos: f64 = a
            .iter()
            .zip(gamma)
            .map(|(&n, &g)| squeeze_overlap(n as usize, exponential_tau(sigma, g), &quad.0, &quad.1))
            .product();
        max_angle = max_angle.max((1.0 - cos * cos).max(0.0).sqrt().atan2(cos.abs()));
    }
    Ok(ProbeResult {
        epsilon: eps,
        max_eigenvalue_rel_error: max_err,
        max_principal_angle: max_angle,
    })
}

/// Runs the probe over a grid of decay rates and fits the convergence rate.
pub fn rate_probe(gamma: &[f64], family: ProbeFamily, eps_grid: &[f64], exec: Execution) -> Result<RateReport> {
    if eps_grid.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return input("decay rates must be positive");
    }
    let quad = gauss_hermite(80)?;
    let rows = exec
        .map(eps_grid.len(), |i| {
            let eps = eps_grid[i];
            match family {
                ProbeFamily::Geometric { truncation } => {
                    let c: Vec<f64> = (0..=truncation).map(|l| eps.powi(l as i32)).collect();
                    dpk_convergence_probe(gamma, &c).map(|r| ProbeResult { epsilon: eps, ..r })
                }
                ProbeFamily::Exponential { max_degree } => exponential_probe(gamma, eps, max_degree, &quad),
            }
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let err: Vec<f64> = rows.iter().map(|r| r.max_eigenvalue_rel_error).collect();
    let ang: Vec<f64> = rows.iter().map(|r| r.max_principal_angle).collect();
    Ok(RateReport {
        eigenvalue_slope: loglog_slope(&eps, &err),
        angle_slope: loglog_slope(&eps, &ang),
        rows,
    })
}
