//! The KRR eigenframework: the self-consistent scale κ, the overfitting
//! coefficient and predicted test and train risk.

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::par::Execution;

/// Kernel eigenvalues, matching target coefficients, noise and ridge.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpectrum {
    eigenvalues: Vec<f64>,
    coefficients: Vec<f64>,
    noise: f64,
    ridge: f64,
    tail_mass: f64,
}

impl TaskSpectrum {
    /// Pairs are re-sorted by eigenvalue, descending. `noise` is ε².
    pub fn new(
        eigenvalues: Vec<f64>,
        coefficients: Vec<f64>,
        noise: f64,
        ridge: f64,
        tail_mass: f64,
    ) -> Result<Self> {
        if eigenvalues.len() != coefficients.len() {
            return Err(Error::Dimension {
                expected: eigenvalues.len(),
                found: coefficients.len(),
            });
        }
        if eigenvalues.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return input("eigenvalues must be finite and nonnegative");
        }
        if coefficients.iter().any(|v| !v.is_finite()) {
            return input("target coefficients must be finite");
        }
        for (name, v) in [("noise", noise), ("ridge", ridge), ("tail mass", tail_mass)] {
            if !(v.is_finite() && v >= 0.0) {
                return input(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        let mut pairs: Vec<(f64, f64)> = eigenvalues.into_iter().zip(coefficients).collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (eigenvalues, coefficients) = pairs.into_iter().unzip();
        Ok(Self {
            eigenvalues,
            coefficients,
            noise,
            ridge,
            tail_mass,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// `δ̃ = δ + tail mass`.
    pub fn effective_ridge(&self) -> f64 {
        self.ridge + self.tail_mass
    }

    fn positive_modes(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l > 0.0).count()
    }
}

/// `δ̃ = δ + max(0, trace - Σλ)`; the flag reports whether the gap was
/// negative and clamped.
pub fn tail_corrected_ridge(ridge: f64, trace: f64, eigenvalues: &[f64]) -> (f64, bool) {
    let gap = trace - eigenvalues.iter().sum::<f64>();
    (ridge + gap.max(0.0), gap < -1e-9)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskPrediction {
    pub n: f64,
    pub kappa: f64,
    pub e0: f64,
    pub bias: f64,
    pub test_risk: f64,
    pub train_risk: f64,
}

/// `Σ λ/(λ+κ) + δ̃/κ - n`.
pub fn kappa_residual(spectrum: &TaskSpectrum, n: f64, kappa: f64) -> f64 {
    learnability_sum(spectrum.eigenvalues(), kappa) + spectrum.effective_ridge() / kappa - n
}

fn learnability_sum(lambda: &[f64], kappa: f64) -> f64 {
    lambda.iter().map(|l| l / (l + kappa)).sum()
}

/// Unique positive root of `Σ λ_i/(λ_i+κ) + δ̃/κ = n`.
///
/// Sixty bisection steps on `log κ` over a bracket that always contains
/// the root, then up to five Newton steps kept inside the bracket.
pub fn solve_kappa(spectrum: &TaskSpectrum, n: f64) -> Result<f64> {
    if !(n.is_finite() && n > 0.0) {
        return input(format!("sample count must be positive, got {n}"));
    }
    let lam = spectrum.eigenvalues();
    let dt = spectrum.effective_ridge();
    let positive = spectrum.positive_modes();
    if dt == 0.0 && (positive as f64) <= n {
        return Err(Error::Ridgeless {
            n,
            positive_modes: positive,
        });
    }
    if positive == 0 {
        return Ok(dt / n);
    }
    let f = |k: f64| learnability_sum(lam, k) + dt / k - n;
    let total: f64 = lam.iter().sum::<f64>() + dt;
    let mut hi = total / n * 1e6;
    let mut lo = if dt > 0.0 {
        dt / n * 1e-6
    } else {
        lam.iter().copied().filter(|&l| l > 0.0).fold(f64::INFINITY, f64::min) * 1e-6
    };
    while f(lo) <= 0.0 {
        lo *= 1e-6;
        if lo < f64::MIN_POSITIVE {
            return Err(Error::Numerical("kappa bracket collapsed".into()));
        }
    }
    while f(hi) >= 0.0 {
        hi *= 1e6;
        if !hi.is_finite() {
            return Err(Error::Numerical("kappa bracket overflowed".into()));
        }
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if f(m.exp()) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let (lo, hi) = (a.exp(), b.exp());
    let mut k = (0.5 * (a + b)).exp();
    let mut fk = f(k);
    for _ in 0..5 {
        if fk == 0.0 {
            break;
        }
        let df = -lam.iter().map(|l| l / ((l + k) * (l + k))).sum::<f64>() - dt / (k * k);
        let next = k - fk / df;
        if !(next >= lo && next <= hi) {
            break;
        }
        let fnext = f(next);
        if fnext.abs() >= fk.abs() {
            break;
        }
        k = next;
        fk = fnext;
    }
    Ok(k)
}

/// Risk prediction at sample size `n`.
pub fn predict_risk(spectrum: &TaskSpectrum, n: f64) -> Result<RiskPrediction> {
    let kappa = solve_kappa(spectrum, n)?;
    let lam = spectrum.eigenvalues();
    let dof2: f64 = lam.iter().map(|l| (l / (l + kappa)).powi(2)).sum();
    let denom = n - dof2;
    if !(denom > 0.0) {
        return Err(Error::Numerical(format!(
            "overfitting coefficient denominator {denom} is not positive"
        )));
    }
    let e0 = n / denom;
    let bias = lam
        .iter()
        .zip(spectrum.coefficients())
        .map(|(l, v)| (kappa / (l + kappa)).powi(2) * v * v)
        .sum::<f64>()
        + spectrum.noise();
    let test_risk = e0 * bias;
    let dt = spectrum.effective_ridge();
    let train_risk = dt * dt / (n * n * kappa * kappa) * test_risk;
    Ok(RiskPrediction {
        n,
        kappa,
        e0,
        bias,
        test_risk,
        train_risk,
    })
}

/// One prediction per grid point; the grid must be strictly increasing.
pub fn learning_curve_prediction(spectrum: &TaskSpectrum, n_grid: &[f64]) -> Result<Vec<RiskPrediction>> {
    learning_curve_prediction_with(spectrum, n_grid, Execution::default())
}

pub fn learning_curve_prediction_with(
    spectrum: &TaskSpectrum,
    n_grid: &[f64],
    exec: Execution,
) -> Result<Vec<RiskPrediction>> {
    if n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return input("sample-size grid must be strictly increasing");
    }
    exec.map(n_grid.len(), |i| predict_risk(spectrum, n_grid[i]))
        .into_iter()
        .collect()
}
