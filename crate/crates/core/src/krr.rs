//! Empirical kernel ridge regression and learning curves.

use faer::{Mat, MatRef};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::{rng_stream, DataMatrix};
use crate::error::{input, Error, Result};
use crate::kernels::{kernel_matrix_with, kernel_matrix_sym_with, KernelSpec};
use crate::linalg::cholesky_solve;
use crate::par::Execution;

/// `f̂(x) = k(x, X) (K + δI)^{-1} y` at every row of `test_x`.
pub fn krr_fit_predict(
    spec: &KernelSpec,
    train_x: &DataMatrix,
    train_y: &[f64],
    test_x: &DataMatrix,
    ridge: f64,
) -> Result<Vec<f64>> {
    if train_y.len() != train_x.nrows() {
        return Err(Error::Dimension {
            expected: train_x.nrows(),
            found: train_y.len(),
        });
    }
    let y = Mat::from_fn(train_y.len(), 1, |i, _| train_y[i]);
    let f = krr_fit_predict_multi(spec, train_x, y.as_ref(), test_x, ridge, Execution::Sequential)?;
    Ok(f.col(0).iter().copied().collect())
}

/// [`krr_fit_predict`] for several targets (columns of `train_y`) at once.
pub fn krr_fit_predict_multi(
    spec: &KernelSpec,
    train_x: &DataMatrix,
    train_y: MatRef<'_, f64>,
    test_x: &DataMatrix,
    ridge: f64,
    exec: Execution,
) -> Result<Mat<f64>> {
    spec.validate()?;
    if !(ridge.is_finite() && ridge >= 0.0) {
        return input(format!("ridge must be finite and nonnegative, got {ridge}"));
    }
    if train_y.nrows() != train_x.nrows() {
        return Err(Error::Dimension {
            expected: train_x.nrows(),
            found: train_y.nrows(),
        });
    }
    let mut k = kernel_matrix_sym_with(spec, train_x, exec);
    for i in 0..k.nrows() {
        k[(i, i)] += ridge;
    }
    let alpha = cholesky_solve(k.as_ref(), train_y)?;
    let kt = kernel_matrix_with(spec, test_x, train_x, exec)?;
    Ok(kt * alpha)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub mse_mean: f64,
    pub mse_stderr: f64,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningCurveResult {
    pub points: Vec<CurvePoint>,
    pub kernel: KernelSpec,
    pub ridge: f64,
    pub seed: u64,
}

impl LearningCurveResult {
    pub fn n_grid(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.n).collect()
    }

    /// `(n, mean MSE)` pairs.
    pub fn curve(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.n as f64, p.mse_mean)).collect()
    }
}

/// Protocol for [`empirical_learning_curves`].
#[derive(Clone, Debug, PartialEq)]
pub struct CurveProtocol {
    pub n_grid: Vec<usize>,
    pub ridge: f64,
    pub trials: usize,
    pub test_size: usize,
    pub seed: u64,
}

/// Learning curve for one target; see [`empirical_learning_curves`].
pub fn empirical_learning_curve(
    spec: &KernelSpec,
    pool: &DataMatrix,
    labels: &[f64],
    protocol: &CurveProtocol,
    exec: Execution,
) -> Result<LearningCurveResult> {
    let mut v = empirical_learning_curves(spec, pool, &[labels.to_vec()], protocol, exec)?;
    Ok(v.remove(0))
}

/// Test MSE of KRR over a grid of training-set sizes.
///
/// Every `(n, trial)` pair draws a fresh disjoint train/test split from
/// the pool using its own RNG stream, so results are independent of the
/// execution policy. All targets share the same splits.
pub fn empirical_learning_curves(
    spec: &KernelSpec,
    pool: &DataMatrix,
    targets: &[Vec<f64>],
    protocol: &CurveProtocol,
    exec: Execution,
) -> Result<Vec<LearningCurveResult>> {
    spec.validate()?;
    let CurveProtocol {
        n_grid,
        ridge,
        trials,
        test_size,
        seed,
    } = protocol;
    let (trials, test_size) = (*trials, *test_size);
    if trials == 0 || test_size == 0 || n_grid.is_empty() || targets.is_empty() {
        return input("need at least one trial, test sample, grid point and target");
    }
    if n_grid.windows(2).any(|w| w[1] <= w[0]) || n_grid[0] == 0 {
        return input("sample-size grid must be positive and strictly increasing");
    }
    if let Some(t) = targets.iter().find(|t| t.len() != pool.nrows()) {
        return Err(Error::Dimension {
            expected: pool.nrows(),
            found: t.len(),
        });
    }
    let n_max = *n_grid.last().expect("nonempty");
    if pool.nrows() < n_max + test_size {
        return input(format!(
            "pool of {} samples cannot supply {n_max} training and {test_size} test samples",
            pool.nrows()
        ));
    }
    let tasks = n_grid.len() * trials;
    let results: Vec<Result<Vec<f64>>> = exec.map(tasks, |task| {
        let n = n_grid[task / trials];
        let mut rng = rng_stream(*seed, task as u64);
        let idx = index::sample(&mut rng, pool.nrows(), n + test_size).into_vec();
        let (train, test) = idx.split_at(n);
        let train_x = pool.select_rows(train);
        let test_x = pool.select_rows(test);
        let y = Mat::from_fn(n, targets.len(), |i, t| targets[t][train[i]]);
        let f = krr_fit_predict_multi(spec, &train_x, y.as_ref(), &test_x, *ridge, Execution::Sequential)?;
        Ok((0..targets.len())
            .map(|t| {
                test.iter()
                    .enumerate()
                    .map(|(i, &j)| (f[(i, t)] - targets[t][j]).powi(2))
                    .sum::<f64>()
                    / test_size as f64
            })
            .collect())
    });
    let mses = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((0..targets.len())
        .map(|t| {
            let points = n_grid
                .iter()
                .enumerate()
                .map(|(g, &n)| {
                    let xs: Vec<f64> = (0..trials).map(|k| mses[g * trials + k][t]).collect();
                    let (mean, stderr) = mean_stderr(&xs);
                    CurvePoint {
                        n,
                        mse_mean: mean,
                        mse_stderr: stderr,
                        trials,
                    }
                })
                .collect();
            LearningCurveResult {
                points,
                kernel: spec.clone(),
                ridge: *ridge,
                seed: *seed,
            }
        })
        .collect())
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleComplexity {
    Found(f64),
    Unbounded,
}

impl SampleComplexity {
    pub fn value(self) -> f64 {
        match self {
            SampleComplexity::Found(n) => n,
            SampleComplexity::Unbounded => f64::INFINITY,
        }
    }
}

/// First `n` where the curve drops to `threshold`, interpolating linearly
/// in `(log n, log MSE)` between the bracketing grid points.
pub fn sample_complexity(curve: &[(f64, f64)], threshold: f64) -> SampleComplexity {
    let Some(i) = curve.iter().position(|&(_, m)| m <= threshold) else {
        return SampleComplexity::Unbounded;
    };
    if i == 0 {
        return SampleComplexity::Found(curve[0].0);
    }
    let (n0, m0) = curve[i - 1];
    let (n1, m1) = curve[i];
    if !(m1 > 0.0 && threshold > 0.0) {
        return SampleComplexity::Found(n1);
    }
    let t = (threshold.ln() - m0.ln()) / (m1.ln() - m0.ln());
    SampleComplexity::Found((n0.ln() + t * (n1.ln() - n0.ln())).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_in_log_log() {
        let c = [(10.0, 1.0), (100.0, 0.25)];
        match sample_complexity(&c, 0.5) {
            SampleComplexity::Found(n) => assert!((n - 10f64.powf(1.5)).abs() < 1e-9),
            _ => panic!(),
        }
        assert_eq!(sample_complexity(&c, 2.0), SampleComplexity::Found(10.0));
        assert_eq!(sample_complexity(&c, 0.1), SampleComplexity::Unbounded);
    }

    #[test]
    fn single_point_interpolation() {
        let spec = KernelSpec::Gaussian { sigma: 1.0 };
        let x = DataMatrix::from_rows(&[vec![0.3, 0.1]]).unwrap();
        let f = krr_fit_predict(&spec, &x, &[2.5], &x, 0.0).unwrap();
        assert!((f[0] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn duplicate_points_without_ridge_fail() {
        let spec = KernelSpec::Gaussian { sigma: 1.0 };
        let x = DataMatrix::from_rows(&[vec![0.3], vec![0.3]]).unwrap();
        assert_eq!(krr_fit_predict(&spec, &x, &[1.0, 2.0], &x, 0.0), Err(Error::Singular));
    }

    #[test]
    fn pool_too_small() {
        let spec = KernelSpec::Gaussian { sigma: 1.0 };
        let x = DataMatrix::from_rows(&[vec![0.3], vec![0.1]]).unwrap();
        let p = CurveProtocol {
            n_grid: vec![2],
            ridge: 1e-3,
            trials: 1,
            test_size: 1,
            seed: 0,
        };
        assert!(empirical_learning_curve(&spec, &x, &[0.0, 0.0], &p, Execution::Sequential).is_err());
    }
}
