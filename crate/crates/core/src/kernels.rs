//! Rotation-invariant kernels and their on-sphere level coefficients.

use std::f64::consts::PI;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{input, Error, Result};
use crate::hermite::factorial;
use crate::par::Execution;

/// Kernel family and parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `exp(-‖x-x'‖² / 2σ²)`
    Gaussian { sigma: f64 },
    /// `exp(x·x' / σ²)`
    Exponential { sigma: f64 },
    /// `exp(-‖x-x'‖ / σ)`
    Laplace { sigma: f64 },
    /// One-hidden-layer ReLU network Gaussian-process kernel.
    ReluNngp { sigma_w2: f64, sigma_b2: f64 },
    /// One-hidden-layer ReLU neural tangent kernel.
    ReluNtk { sigma_w2: f64, sigma_b2: f64 },
    /// `Σ_ℓ c_ℓ (x·x')^ℓ / ℓ!` with a finite coefficient list.
    DotProduct { coefficients: Vec<f64> },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                input(format!("{name} must be positive and finite, got {v}"))
            }
        };
        match self {
            KernelSpec::Gaussian { sigma }
            | KernelSpec::Exponential { sigma }
            | KernelSpec::Laplace { sigma } => pos("sigma", *sigma),
            KernelSpec::ReluNngp { sigma_w2, sigma_b2 } | KernelSpec::ReluNtk { sigma_w2, sigma_b2 } => {
                pos("sigma_w2", *sigma_w2)?;
                if sigma_b2.is_finite() && *sigma_b2 >= 0.0 {
                    Ok(())
                } else {
                    input(format!("sigma_b2 must be nonnegative, got {sigma_b2}"))
                }
            }
            KernelSpec::DotProduct { coefficients } => {
                if coefficients.is_empty() {
                    return input("dot-product kernel needs at least one coefficient");
                }
                if coefficients.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
                    return input("dot-product coefficients must be finite and nonnegative");
                }
                Ok(())
            }
        }
    }

    /// Suggested truncation degree for the level coefficients.
    pub fn default_truncation(&self) -> usize {
        match self {
            KernelSpec::Gaussian { .. } | KernelSpec::Exponential { .. } => 25,
            KernelSpec::DotProduct { coefficients } => coefficients.len() - 1,
            _ => 8,
        }
    }

    /// Suggested maximum eigensystem degree.
    pub fn default_max_degree(&self) -> usize {
        match self {
            KernelSpec::Gaussian { .. } | KernelSpec::Exponential { .. } => 10,
            KernelSpec::DotProduct { coefficients } => (coefficients.len() - 1).min(10),
            _ => 5,
        }
    }

    /// `K(x, x')` from `‖x‖²`, `‖x'‖²` and `x·x'`.
    pub fn eval_from_gram(&self, xx: f64, yy: f64, xy: f64) -> f64 {
        match self {
            KernelSpec::Gaussian { sigma } => {
                let d2 = (xx + yy - 2.0 * xy).max(0.0);
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::Exponential { sigma } => (xy / (sigma * sigma)).exp(),
            KernelSpec::Laplace { sigma } => {
                let d2 = (xx + yy - 2.0 * xy).max(0.0);
                (-d2.sqrt() / sigma).exp()
            }
            KernelSpec::ReluNngp { sigma_w2, sigma_b2 } => {
                arccos_kernel(*sigma_w2, *sigma_b2, xx, yy, xy, arc_h)
            }
            KernelSpec::ReluNtk { sigma_w2, sigma_b2 } => {
                arccos_kernel(*sigma_w2, *sigma_b2, xx, yy, xy, arc_j)
            }
            KernelSpec::DotProduct { coefficients } => {
                let mut term = 1.0;
                let mut s = 0.0;
                for (l, c) in coefficients.iter().enumerate() {
                    if l > 0 {
                        term *= xy / l as f64;
                    }
                    s += c * term;
                }
                s
            }
        }
    }

    /// `K(x, x')` for two points.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        if matches!(self, KernelSpec::Gaussian { .. } | KernelSpec::Laplace { .. }) {
            let d2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
            return self.eval_from_gram(d2, 0.0, 0.0);
        }
        self.eval_from_gram(dot(x, x), dot(y, y), dot(x, y))
    }
}

fn arccos_kernel(w2: f64, b2: f64, xx: f64, yy: f64, xy: f64, f: fn(f64) -> f64) -> f64 {
    let q1 = w2 * xx + b2;
    let q2 = w2 * yy + b2;
    let k1 = w2 * xy + b2;
    let norm = (q1 * q2).sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let rho = (k1 / norm).clamp(-1.0, 1.0);
    w2 / (2.0 * PI) * norm * f(rho)
}

/// `H(ρ) = sqrt(1-ρ²) + (π - arccos ρ) ρ`.
pub fn arc_h(rho: f64) -> f64 {
    (1.0 - rho * rho).max(0.0).sqrt() + (PI - rho.acos()) * rho
}

/// `J(ρ) = sqrt(1-ρ²) + 2ρ (π - arccos ρ)`.
pub fn arc_j(rho: f64) -> f64 {
    (1.0 - rho * rho).max(0.0).sqrt() + 2.0 * rho * (PI - rho.acos())
}

fn norms2(m: MatRef<'_, f64>) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * m[(i, j)]).sum())
        .collect()
}

/// Kernel matrix `K[i, j] = K(a_i, b_j)`.
pub fn kernel_matrix(spec: &KernelSpec, a: &DataMatrix, b: &DataMatrix) -> Result<Mat<f64>> {
    kernel_matrix_with(spec, a, b, Execution::default())
}

pub fn kernel_matrix_with(
    spec: &KernelSpec,
    a: &DataMatrix,
    b: &DataMatrix,
    exec: Execution,
) -> Result<Mat<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension {
            expected: a.ncols(),
            found: b.ncols(),
        });
    }
    let gram = a.as_ref() * b.as_ref().transpose();
    let na = norms2(a.as_ref());
    let nb = norms2(b.as_ref());
    let (n, m) = (a.nrows(), b.nrows());
    let mut buf = vec![0.0; n * m];
    exec.for_each_chunk(&mut buf, n, |j, col| {
        for (i, v) in col.iter_mut().enumerate() {
            *v = spec.eval_from_gram(na[i], nb[j], gram[(i, j)]);
        }
    });
    Ok(MatRef::from_column_major_slice(&buf, n, m).to_owned())
}

/// Symmetric kernel matrix `K[i, j] = K(x_i, x_j)`; the diagonal uses
/// `x·x = ‖x‖²` exactly.
pub fn kernel_matrix_sym(spec: &KernelSpec, x: &DataMatrix) -> Mat<f64> {
    kernel_matrix_sym_with(spec, x, Execution::default())
}

pub fn kernel_matrix_sym_with(spec: &KernelSpec, x: &DataMatrix, exec: Execution) -> Mat<f64> {
    let gram = x.as_ref() * x.as_ref().transpose();
    let nx = norms2(x.as_ref());
    let n = x.nrows();
    let mut buf = vec![0.0; n * n];
    exec.for_each_chunk(&mut buf, n, |j, col| {
        for i in j..n {
            col[i] = if i == j {
                spec.eval_from_gram(nx[i], nx[i], nx[i])
            } else {
                spec.eval_from_gram(nx[i], nx[j], gram[(i, j)])
            };
        }
    });
    for j in 0..n {
        for i in 0..j {
            buf[j * n + i] = buf[i * n + j];
        }
    }
    MatRef::from_column_major_slice(&buf, n, n).to_owned()
}

/// `(1/N) Σ_i K(x_i, x_i)`.
pub fn trace_estimate(spec: &KernelSpec, data: &DataMatrix) -> f64 {
    match spec {
        KernelSpec::Gaussian { .. } | KernelSpec::Laplace { .. } => 1.0,
        _ => {
            let x = data.as_ref();
            let n = data.nrows();
            (0..n)
                .map(|i| {
                    let s: f64 = (0..data.ncols()).map(|j| x[(i, j)] * x[(i, j)]).sum();
                    spec.eval_from_gram(s, s, s)
                })
                .sum::<f64>()
                / n as f64
        }
    }
}

/// On-sphere level coefficients `c_0 .. c_L` at radius `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCoefficients {
    pub radius: f64,
    pub values: Vec<f64>,
}

impl LevelCoefficients {
    pub fn truncation(&self) -> usize {
        self.values.len() - 1
    }

    /// `c_ℓ`, zero beyond the truncation.
    pub fn get(&self, l: usize) -> f64 {
        self.values.get(l).copied().unwrap_or(0.0)
    }
}

/// Coefficients with `K(x,x') = Σ_ℓ c_ℓ (x·x')^ℓ / ℓ!` on the sphere `‖x‖ = r`.
pub fn level_coefficients(spec: &KernelSpec, r: f64, truncation: usize) -> Result<LevelCoefficients> {
    spec.validate()?;
    if !(r.is_finite() && r > 0.0) {
        return input(format!("radius must be positive, got {r}"));
    }
    let big_l = truncation;
    let values: Vec<f64> = match spec {
        KernelSpec::Gaussian { sigma } => {
            let s2 = sigma * sigma;
            let pre = (-r * r / s2).exp();
            (0..=big_l).map(|l| pre * s2.powi(-(l as i32))).collect()
        }
        KernelSpec::Exponential { sigma } => {
            let s2 = sigma * sigma;
            (0..=big_l).map(|l| s2.powi(-(l as i32))).collect()
        }
        KernelSpec::Laplace { sigma } => laplace_coefficients(2f64.sqrt() * r / sigma, r, big_l),
        KernelSpec::ReluNngp { sigma_w2, sigma_b2 } => {
            arccos_coefficients(*sigma_w2, *sigma_b2, r, big_l, ArcKind::Nngp)?
        }
        KernelSpec::ReluNtk { sigma_w2, sigma_b2 } => {
            arccos_coefficients(*sigma_w2, *sigma_b2, r, big_l, ArcKind::Ntk)?
        }
        KernelSpec::DotProduct { coefficients } => {
            (0..=big_l).map(|l| coefficients.get(l).copied().unwrap_or(0.0)).collect()
        }
    };
    if values.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("level coefficient overflow".into()));
    }
    Ok(LevelCoefficients { radius: r, values })
}

/// Bessel polynomials `y_n(x)` for `n = -1 ..= nmax`, via
/// `y_n = (2n-1) x y_{n-1} + y_{n-2}` with `y_{-1} = y_0 = 1`.
///
/// Entry `k` of the result holds `y_{k-1}(x)`.
pub fn bessel_polynomials(nmax: usize, x: f64) -> Vec<f64> {
    let mut y = vec![1.0, 1.0];
    for n in 1..=nmax {
        let next = (2 * n - 1) as f64 * x * y[n] + y[n - 1];
        y.push(next);
    }
    y.truncate(nmax + 2);
    y
}

/// Laplace coefficients `c_ℓ = e^{-β} r^{-2ℓ} y_{ℓ-1}(1/β) (β/2)^ℓ`, the
/// Taylor coefficients of `exp(-β sqrt(1-s))` in `s = x·x'/r²` times `ℓ!/r^{2ℓ}`.
fn laplace_coefficients(beta: f64, r: f64, big_l: usize) -> Vec<f64> {
    let y = bessel_polynomials(big_l.saturating_sub(1), 1.0 / beta);
    let pre = (-beta).exp();
    (0..=big_l)
        .map(|l| pre * y[l] * (beta / 2.0).powi(l as i32) / (r * r).powi(l as i32))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArcKind {
    Nngp,
    Ntk,
}

fn arccos_coefficients(w2: f64, b2: f64, r: f64, big_l: usize, kind: ArcKind) -> Result<Vec<f64>> {
    let q = w2 * r * r + b2;
    let a = b2 / q;
    if !(a < 1.0) {
        return input(format!("arc-cosine expansion point a = {a} must be below 1"));
    }
    let pre = w2 / (2.0 * PI) * q;
    let ratio = w2 / q;
    let derivs = arccos_derivatives(kind, a, big_l)?;
    Ok((0..=big_l)
        .map(|l| pre * ratio.powi(l as i32) * derivs[l])
        .collect())
}

/// Polynomial with exact integer-valued coefficients, lowest degree first.
#[derive(Clone, Debug, PartialEq)]
struct Poly(Vec<f64>);

impl Poly {
    fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// `d/da [p (1-a²)^{-m-1/2}] = q (1-a²)^{-m-3/2}` with
    /// `q = p' (1-a²) + (2m+1) a p`.
    fn step(&self, m: usize) -> Poly {
        let p = &self.0;
        let mut q = vec![0.0; p.len() + 1];
        for (k, &c) in p.iter().enumerate().skip(1) {
            let dc = k as f64 * c;
            q[k - 1] += dc;
            q[k + 1] -= dc;
        }
        for (k, &c) in p.iter().enumerate() {
            q[k + 1] += (2 * m + 1) as f64 * c;
        }
        while q.len() > 1 && q.last() == Some(&0.0) {
            q.pop();
        }
        Poly(q)
    }
}

/// `H^{(ℓ)}(a)` or `J^{(ℓ)}(a)` for `ℓ = 0..=lmax`.
///
/// Orders up to four use closed forms; higher orders differentiate the
/// rational form `p(a) / (1-a²)^{m+1/2}` with `p` kept exactly.
pub fn arccos_derivatives(kind: ArcKind, a: f64, lmax: usize) -> Result<Vec<f64>> {
    if !(a.abs() < 1.0) {
        return input(format!("|a| must be below 1, got {a}"));
    }
    let w = 1.0 - a * a;
    let sw = w.sqrt();
    let closed: [f64; 5] = match kind {
        ArcKind::Nngp => [
            arc_h(a),
            PI - a.acos(),
            1.0 / sw,
            a / (w * sw),
            (2.0 * a * a + 1.0) / (w * w * sw),
        ],
        ArcKind::Ntk => [
            arc_j(a),
            2.0 * (PI - a.acos()) + a / sw,
            (3.0 - 2.0 * a * a) / (w * sw),
            a * (5.0 - 2.0 * a * a) / (w * w * sw),
            (5.0 + 14.0 * a * a - 4.0 * a.powi(4)) / (w * w * w * sw),
        ],
    };
    let mut out: Vec<f64> = closed.iter().take(lmax + 1).copied().collect();
    if lmax > 4 {
        for (l, v) in rational_derivatives(kind, lmax).into_iter().enumerate().skip(5) {
            let (p, m) = v;
            out.push(p.eval(a) / w.powi(m as i32) / sw);
            debug_assert_eq!(out.len(), l + 1);
        }
    }
    Ok(out)
}

/// `(p_ℓ, m_ℓ)` with `f^{(ℓ)}(a) = p_ℓ(a) / (1-a²)^{m_ℓ+1/2}` for `2 ≤ ℓ ≤ lmax`;
/// entries 0 and 1 are placeholders.
fn rational_derivatives(kind: ArcKind, lmax: usize) -> Vec<(Poly, usize)> {
    let seed = match kind {
        ArcKind::Nngp => (Poly(vec![1.0]), 0),
        ArcKind::Ntk => (Poly(vec![3.0, 0.0, -2.0]), 1),
    };
    let mut v = vec![(Poly(vec![0.0]), 0), (Poly(vec![0.0]), 0), seed];
    while v.len() <= lmax {
        let (p, m) = v.last().cloned().expect("nonempty");
        v.push((p.step(m), m + 1));
    }
    v.truncate(lmax + 1);
    v
}

/// `Σ_ℓ c_ℓ t^ℓ / ℓ!`, the truncated on-sphere series at `t = x·x'`.
pub fn sphere_series(coeffs: &LevelCoefficients, t: f64) -> f64 {
    coeffs
        .values
        .iter()
        .enumerate()
        .map(|(l, c)| c * t.powi(l as i32) / factorial(l))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointwise_values() {
        let g = KernelSpec::Gaussian { sigma: 1.3 };
        assert_eq!(g.eval(&[0.2, -1.0], &[0.2, -1.0]), 1.0);
        let l = KernelSpec::Laplace { sigma: 1.0 };
        assert!((l.eval(&[0.0, 0.0], &[0.6, 0.8]) - (-1f64).exp()).abs() < 1e-15);
        let nngp = KernelSpec::ReluNngp { sigma_w2: 1.0, sigma_b2: 0.0 };
        assert!((nngp.eval(&[1.0, 0.0], &[0.0, 1.0]) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((nngp.eval(&[0.6, 0.8], &[0.6, 0.8]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gaussian_unit_width_coefficients() {
        let c = level_coefficients(&KernelSpec::Gaussian { sigma: 1.0 }, 1.0, 6).unwrap();
        for v in &c.values {
            assert!((v - (-1f64).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn bessel_low_orders() {
        let x = 0.37;
        let y = bessel_polynomials(3, x);
        assert_eq!(y.len(), 5);
        assert_eq!(y[0], 1.0);
        assert_eq!(y[1], 1.0);
        assert!((y[2] - (1.0 + x)).abs() < 1e-15);
        assert!((y[3] - (1.0 + 3.0 * x + 3.0 * x * x)).abs() < 1e-15);
        let y3 = 1.0 + 6.0 * x + 15.0 * x * x + 15.0 * x.powi(3);
        assert!((y[4] - y3).abs() < 1e-14);
    }

    #[test]
    fn laplace_coefficients_match_taylor_series() {
        // β = 1: exp(-sqrt(1-s)) = e^{-1} (1 + s/2 + s²/4 + s³/6 ...) so
        // c₂ = 2!·e^{-1}/4 and c₃ = 3!·e^{-1}·(1/16 + 1/16 + 1/48).
        let c = level_coefficients(&KernelSpec::Laplace { sigma: 2f64.sqrt() }, 1.0, 3).unwrap();
        let e = (-1f64).exp();
        assert!((c.values[0] - e).abs() < 1e-15);
        assert!((c.values[1] - e / 2.0).abs() < 1e-15);
        assert!((c.values[2] - e / 2.0).abs() < 1e-15);
        assert!((c.values[3] - e * 6.0 * (7.0 / 48.0)).abs() < 1e-15);
    }

    #[test]
    fn derivative_tables_at_zero() {
        let h = arccos_derivatives(ArcKind::Nngp, 0.0, 4).unwrap();
        assert!((h[2] - 1.0).abs() < 1e-15);
        let j = arccos_derivatives(ArcKind::Ntk, 0.0, 4).unwrap();
        assert!((j[0] - 1.0).abs() < 1e-15);
        assert!((j[1] - PI).abs() < 1e-15);
        assert!((j[4] - 5.0).abs() < 1e-15);
        assert!(arccos_derivatives(ArcKind::Ntk, 1.0, 3).is_err());
    }

    #[test]
    fn recurrence_reproduces_closed_forms() {
        for kind in [ArcKind::Nngp, ArcKind::Ntk] {
            let forms = rational_derivatives(kind, 4);
            for &a in &[0.0, 0.3, -0.55, 0.9] {
                let closed = arccos_derivatives(kind, a, 4).unwrap();
                let w: f64 = 1.0 - a * a;
                for l in 2..=4 {
                    let (p, m) = &forms[l];
                    let v = p.eval(a) / w.powi(*m as i32) / w.sqrt();
                    assert!((v - closed[l]).abs() < 1e-12 * closed[l].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn ntk_unit_sphere_coefficients() {
        let c = level_coefficients(&KernelSpec::ReluNtk { sigma_w2: 1.0, sigma_b2: 0.0 }, 1.0, 2).unwrap();
        assert!((c.values[0] - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((c.values[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn trace_estimates() {
        let x = DataMatrix::from_rows(&[vec![0.6, 0.8], vec![1.0, 0.0]]).unwrap();
        assert_eq!(trace_estimate(&KernelSpec::Gaussian { sigma: 0.1 }, &x), 1.0);
        let nngp = KernelSpec::ReluNngp { sigma_w2: 1.0, sigma_b2: 0.0 };
        assert!((trace_estimate(&nngp, &x) - 0.5).abs() < 1e-15);
        let e = KernelSpec::Exponential { sigma: 2.0 };
        assert!((trace_estimate(&e, &x) - 0.25f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn symmetric_matrix_matches_general() {
        let x = DataMatrix::from_rows(&[vec![0.1, 0.3], vec![-0.4, 0.9], vec![1.2, -0.2]]).unwrap();
        for spec in [
            KernelSpec::Gaussian { sigma: 0.7 },
            KernelSpec::Laplace { sigma: 1.1 },
            KernelSpec::ReluNtk { sigma_w2: 0.5, sigma_b2: 0.2 },
        ] {
            let a = kernel_matrix(&spec, &x, &x).unwrap();
            let b = kernel_matrix_sym(&spec, &x);
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        assert!((a[(i, j)] - b[(i, j)]).abs() < 1e-14);
                    }
                    assert_eq!(b[(i, j)], b[(j, i)]);
                }
                let xi = x.row(i);
                assert!((b[(i, i)] - spec.eval(&xi, &xi)).abs() < 1e-15);
            }
        }
        let g = kernel_matrix_sym(&KernelSpec::Gaussian { sigma: 0.7 }, &x);
        assert!((0..3).all(|i| g[(i, i)] == 1.0));
    }

    #[test]
    fn invalid_specs() {
        assert!(KernelSpec::Gaussian { sigma: 0.0 }.validate().is_err());
        assert!(KernelSpec::ReluNtk { sigma_w2: 1.0, sigma_b2: -1.0 }.validate().is_err());
        assert!(level_coefficients(&KernelSpec::Gaussian { sigma: 1.0 }, 0.0, 3).is_err());
    }
}
