//! Sequential against rayon execution on the three data-parallel hot paths.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hea_core::framework::{learning_curve_prediction_with, TaskSpectrum};
use hea_core::hermite::MultiIndex;
use hea_core::kernels::{kernel_matrix_sym_with, KernelSpec};
use hea_core::krr::{empirical_learning_curve, CurveProtocol};
use hea_core::par::Execution;
use hea_core::pipeline::{hermite_labels, SyntheticData};

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn data(samples: usize) -> SyntheticData {
    SyntheticData {
        dim: 30,
        samples,
        exponent: 3.0,
        offset: 6.0,
        total: 1.0,
    }
}

fn kernel_matrix(c: &mut Criterion) {
    let (_, x) = data(1500).sample(1).unwrap();
    let spec = KernelSpec::Laplace { sigma: 1.0 };
    let mut g = c.benchmark_group("kernel_matrix");
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::new(name, 1500), |b| b.iter(|| kernel_matrix_sym_with(&spec, &x, exec)));
    }
    g.finish();
}

fn empirical_curve(c: &mut Criterion) {
    let (s, x) = data(2000).sample(2).unwrap();
    let y = hermite_labels(&s, &x, &MultiIndex::unit(0, 1)).unwrap();
    let spec = KernelSpec::Gaussian { sigma: 6.0 };
    let protocol = CurveProtocol {
        n_grid: vec![32, 64, 128, 256],
        ridge: 1e-3,
        trials: 4,
        test_size: 500,
        seed: 0,
    };
    let mut g = c.benchmark_group("empirical_curve");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| {
            b.iter(|| empirical_learning_curve(&spec, &x, &y, &protocol, exec).unwrap())
        });
    }
    g.finish();
}

fn kappa_curve(c: &mut Criterion) {
    let lam: Vec<f64> = (1..=20_000).map(|i| (i as f64).powf(-1.5)).collect();
    let v: Vec<f64> = lam.iter().map(|l| l.sqrt()).collect();
    let task = TaskSpectrum::new(lam, v, 0.01, 1e-3, 0.0).unwrap();
    let grid: Vec<f64> = (0..64).map(|k| 10f64.powf(k as f64 / 16.0)).collect();
    let mut g = c.benchmark_group("kappa_curve");
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| b.iter(|| learning_curve_prediction_with(&task, &grid, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, kernel_matrix, empirical_curve, kappa_curve);
criterion_main!(benches);
